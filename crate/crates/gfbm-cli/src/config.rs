//! Flat key=value configuration files with CLI-flag override.
//!
//! A config key becomes `--key value` appended to the argument vector
//! unless the flag is already present, so explicit flags always win.
//! Unknown keys are rejected outright.

const KNOWN_KEYS: &[&str] = &[
    "alpha",
    "gamma",
    "grid",
    "kind",
    "mode",
    "t0",
    "h",
    "x-points",
    "paths",
    "seed",
    "lambda-max",
    "points",
    "functional",
    "delta",
    "kmin",
    "kmax",
    "theta",
    "grid-points",
    "endpoint",
    "weights",
    "out",
    "manifest",
    "summary",
    "threads",
];

/// Applies `--config FILE` (if present) to the argument vector.
pub fn apply_config_file(argv: Vec<String>) -> Result<Vec<String>, String> {
    let Some(path) = find_config_path(&argv)? else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| format!("cannot read config {path}: {e}"))?;

    let mut out = argv.clone();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!(
                "config line {} is not key=value: {raw:?}",
                lineno + 1
            ));
        };
        let key = key.trim();
        let value = value.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(format!("unknown config key {key:?} on line {}", lineno + 1));
        }
        let flag = format!("--{key}");
        if argv.iter().any(|a| a == &flag || a.starts_with(&format!("{flag}="))) {
            continue; // explicit flag wins
        }
        if key == "endpoint" {
            // boolean switch
            match value {
                "true" | "1" => out.push(flag),
                "false" | "0" => {}
                other => {
                    return Err(format!(
                        "config key \"endpoint\" must be true/false (got {other:?})"
                    ))
                }
            }
        } else {
            out.push(flag);
            out.push(value.to_string());
        }
    }
    Ok(out)
}

fn find_config_path(argv: &[String]) -> Result<Option<String>, String> {
    for (i, a) in argv.iter().enumerate() {
        if a == "--config" {
            return match argv.get(i + 1) {
                Some(p) => Ok(Some(p.clone())),
                None => Err("--config needs a file path".into()),
            };
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Ok(Some(p.to_string()));
        }
    }
    Ok(None)
}
