use std::io::Write;
use std::path::Path;

use nnssgd::completion::{MetricRecord, MetricsSink};

pub const METRICS_HEADER: &str = "super_iter,iter,wall_seconds,objective,train_rmse,test_rmse";

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Metrics rows buffered in memory until training succeeds.
#[derive(Default)]
pub struct CsvMetrics {
    pub buf: Vec<u8>,
}

impl CsvMetrics {
    pub fn new() -> Self {
        let mut buf = Vec::new();
        writeln!(buf, "{METRICS_HEADER}").expect("writing to a Vec cannot fail");
        Self { buf }
    }
}

impl MetricsSink<f64> for CsvMetrics {
    fn record(&mut self, r: &MetricRecord<f64>) -> std::io::Result<()> {
        let wall = r.wall_seconds.map(|s| format!("{s:.6}")).unwrap_or_default();
        let test = r.test_rmse.map(|v| v.to_string()).unwrap_or_default();
        writeln!(self.buf, "{},{},{},{},{},{}", r.super_iter, r.iter, wall, r.objective, r.train_rmse, test)
    }
}

/// `%.10g`-style formatting: 10 significant digits, ties to even, trailing
/// zeros removed, scientific notation outside `[1e-4, 1e10)`.
pub fn format_sig10(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.9e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..10).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (9 - exp) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
