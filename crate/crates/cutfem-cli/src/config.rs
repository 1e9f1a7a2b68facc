//! Run options: per-case defaults, overlaid by a flat `key = value` config
//! file, overlaid by command-line flags (flags win).

use std::path::{Path, PathBuf};

/// Everything a case run can be configured with.  `None` means "use the
/// case default".
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub levels: Option<usize>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub order: Option<usize>,
    pub depth: Option<usize>,
    pub eps: Option<f64>,
    pub check: bool,
    pub out: Option<PathBuf>,
}

impl Options {
    /// Overlay `self` (the higher-precedence source) onto `base`.
    pub fn over(self, base: Options) -> Options {
        Options {
            levels: self.levels.or(base.levels),
            beta: self.beta.or(base.beta),
            gamma: self.gamma.or(base.gamma),
            order: self.order.or(base.order),
            depth: self.depth.or(base.depth),
            eps: self.eps.or(base.eps),
            check: self.check || base.check,
            out: self.out.or(base.out),
        }
    }

}

/// Parse a flat `key = value` config file.  Blank lines and `#` comments are
/// ignored; keys match the command-line flags.
pub fn parse_config(path: &Path) -> Result<Options, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let mut opts = Options::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!(
                "{}:{}: expected `key = value`, got `{line}`",
                path.display(),
                lineno + 1
            ));
        };
        let key = key.trim();
        let value = value.trim();
        let bad = |what: &str| {
            format!("{}:{}: invalid {what} `{value}`", path.display(), lineno + 1)
        };
        match key {
            "levels" => opts.levels = Some(value.parse().map_err(|_| bad("levels"))?),
            "beta" => opts.beta = Some(value.parse().map_err(|_| bad("beta"))?),
            "gamma" => opts.gamma = Some(value.parse().map_err(|_| bad("gamma"))?),
            "order" => opts.order = Some(value.parse().map_err(|_| bad("order"))?),
            "depth" => opts.depth = Some(value.parse().map_err(|_| bad("depth"))?),
            "eps" => opts.eps = Some(value.parse().map_err(|_| bad("eps"))?),
            "check" => opts.check = value.parse().map_err(|_| bad("check"))?,
            "out" => opts.out = Some(PathBuf::from(value)),
            other => {
                return Err(format!(
                    "{}:{}: unknown key `{other}`",
                    path.display(),
                    lineno + 1
                ))
            }
        }
    }
    Ok(opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_flags_and_ignores_comments() {
        let f = write_tmp("# study\nlevels = 5\nbeta = 250.5\ncheck = true\n\nout = /tmp/x\n");
        let o = parse_config(f.path()).unwrap();
        assert_eq!(o.levels, Some(5));
        assert_eq!(o.beta, Some(250.5));
        assert!(o.check);
        assert_eq!(o.out.as_deref(), Some(Path::new("/tmp/x")));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let f = write_tmp("wibble = 3\n");
        assert!(parse_config(f.path()).unwrap_err().contains("unknown key"));
        let f = write_tmp("levels = soon\n");
        assert!(parse_config(f.path()).unwrap_err().contains("invalid levels"));
        let f = write_tmp("levels 4\n");
        assert!(parse_config(f.path()).unwrap_err().contains("expected `key = value`"));
    }

    #[test]
    fn flags_override_file_values() {
        let file = Options { levels: Some(3), beta: Some(10.0), ..Default::default() };
        let flags = Options { beta: Some(99.0), ..Default::default() };
        let merged = flags.over(file);
        assert_eq!(merged.levels, Some(3));
        assert_eq!(merged.beta, Some(99.0));
    }
}
