//! File formats: CSV for anything tabular, JSON for structured reports,
//! nothing binary. All floats go through `{}` so rereading them restores the
//! exact bits, and reruns diff clean.

use crate::error::{Error, Result};
use crate::gff::{FieldConfiguration, ModelParams};
use crate::lattice::LatticeShape;
use crate::localtime::LocalTimeHistogram;
use crate::mcmc::diagnostics::TraceDiagnostics;
use crate::mcmc::{McmcSchedule, MoveCounters, Trace};
use crate::spectral::{eigenvalue_product, Spectrum1D};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// Write through a sibling temp file and rename, so readers never observe a
/// half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut s = String::with_capacity(64);
    for b in digest {
        write!(s, "{b:02x}").unwrap();
    }
    s
}

pub fn trace_csv_string(trace: &Trace) -> String {
    let mut s = String::with_capacity(64 * (trace.records.len() + 1));
    s.push_str("sweep,energy,radius,accept_site,accept_global\n");
    for r in &trace.records {
        writeln!(
            s,
            "{},{},{},{},{}",
            r.sweep, r.energy, r.radius, r.accept_site, r.accept_global
        )
        .unwrap();
    }
    s
}

/// Everything about one chain run except the trace table itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceSidecar {
    pub params: ModelParams<f64>,
    pub schedule: McmcSchedule,
    pub seed: u64,
    pub diagnostics: TraceDiagnostics,
    pub final_sigma_site: f64,
    pub counters: MoveCounters,
    pub aborted: Option<String>,
}

/// All n^d modes with their tuple and eigenvalue.
pub fn spectrum_csv_string(spec: &Spectrum1D<f64>, shape: &LatticeShape) -> Result<String> {
    let total = shape.total_sites();
    if total > 1_000_000 {
        return Err(Error::ResourceLimit(format!(
            "spectrum table with {total} rows; cap is 1000000"
        )));
    }
    let mut s = String::from("mode,k_tuple,lambda\n");
    let mut tuple = vec![0usize; shape.dim];
    for m in 0..total {
        shape.mode_tuple(m, &mut tuple);
        let lambda = eigenvalue_product(&tuple, spec)?;
        write!(s, "{m},").unwrap();
        for (i, k) in tuple.iter().enumerate() {
            if i > 0 {
                s.push(' ');
            }
            write!(s, "{k}").unwrap();
        }
        writeln!(s, ",{lambda}").unwrap();
    }
    Ok(s)
}

pub fn field_csv_string(
    field: &FieldConfiguration<f64>,
    params: &ModelParams<f64>,
    seed: u64,
) -> String {
    let shape = &params.shape;
    let mut s = String::new();
    writeln!(
        s,
        "# N={} d={} D={} beta={} gamma={} seed={}",
        shape.half_width, shape.dim, params.range_dim, params.beta, params.gamma, seed
    )
    .unwrap();
    s.push_str("site_index");
    for i in 1..=shape.dim {
        write!(s, ",x_{i}").unwrap();
    }
    for c in 1..=params.range_dim {
        write!(s, ",u_{c}").unwrap();
    }
    s.push('\n');
    let mut coords = Vec::new();
    for site in 0..shape.total_sites() {
        shape.site_coords(site, &mut coords);
        write!(s, "{site}").unwrap();
        for &x in &coords {
            write!(s, ",{x}").unwrap();
        }
        for c in 0..params.range_dim {
            write!(s, ",{}", field.value(c, site)).unwrap();
        }
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone)]
pub struct StoredField {
    pub params: ModelParams<f64>,
    pub seed: u64,
    pub field: FieldConfiguration<f64>,
}

pub fn parse_field_csv(text: &str) -> Result<StoredField> {
    let mut lines = text.lines();
    let meta = lines
        .next()
        .and_then(|l| l.strip_prefix("# "))
        .ok_or_else(|| Error::usage("field file must open with a '# N=... d=...' line"))?;
    let mut n = None;
    let mut d = None;
    let mut dd = None;
    let mut beta = None;
    let mut gamma = None;
    let mut seed = 0u64;
    for pair in meta.split_whitespace() {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::usage(format!("bad metadata entry '{pair}'")))?;
        let bad = |e: &dyn std::fmt::Display| Error::usage(format!("bad {key}: {e}"));
        match key {
            "N" => n = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
            "d" => d = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
            "D" => dd = Some(value.parse::<usize>().map_err(|e| bad(&e))?),
            "beta" => beta = Some(value.parse::<f64>().map_err(|e| bad(&e))?),
            "gamma" => gamma = Some(value.parse::<f64>().map_err(|e| bad(&e))?),
            "seed" => seed = value.parse::<u64>().map_err(|e| bad(&e))?,
            _ => return Err(Error::usage(format!("unknown metadata key '{key}'"))),
        }
    }
    let missing = || Error::usage("metadata must set N, d, D, beta and gamma");
    let shape = LatticeShape::new(n.ok_or_else(missing)?, d.ok_or_else(missing)?)?;
    let range_dim = dd.ok_or_else(missing)?;
    let params = ModelParams::new(
        shape,
        range_dim,
        beta.ok_or_else(missing)?,
        gamma.ok_or_else(missing)?,
    )?;
    let header = lines
        .next()
        .ok_or_else(|| Error::usage("field file ends before the column header"))?;
    if !header.starts_with("site_index") {
        return Err(Error::usage(format!("unexpected column header '{header}'")));
    }
    let mut field = FieldConfiguration::zeros(&shape, range_dim);
    let mut seen = 0usize;
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let site: usize = cells
            .next()
            .unwrap()
            .parse()
            .map_err(|e| Error::usage(format!("bad site index in '{line}': {e}")))?;
        if site >= shape.total_sites() {
            return Err(Error::usage(format!("site {site} out of range")));
        }
        for _ in 0..shape.dim {
            cells
                .next()
                .ok_or_else(|| Error::usage(format!("short row '{line}'")))?;
        }
        for c in 0..range_dim {
            let v: f64 = cells
                .next()
                .ok_or_else(|| Error::usage(format!("short row '{line}'")))?
                .parse()
                .map_err(|e| Error::usage(format!("bad value in '{line}': {e}")))?;
            field.set_value(c, site, v);
        }
        seen += 1;
    }
    if seen != shape.total_sites() {
        return Err(Error::usage(format!(
            "field file holds {seen} rows, lattice has {}",
            shape.total_sites()
        )));
    }
    Ok(StoredField {
        params,
        seed,
        field,
    })
}

/// Nonzero cells only; the window and the in/out totals ride in a comment.
pub fn histogram_csv_string(hist: &LocalTimeHistogram) -> String {
    let dims: Vec<usize> = hist
        .lo
        .iter()
        .zip(&hist.hi)
        .map(|(&l, &h)| (h - l + 1) as usize)
        .collect();
    let mut s = String::from("# lo=");
    push_tuple(&mut s, hist.lo.iter());
    s.push_str(" hi=");
    push_tuple(&mut s, hist.hi.iter());
    writeln!(s, " inside={} outside={}", hist.inside, hist.outside).unwrap();
    s.push_str("z_tuple,count\n");
    let mut idx = vec![0usize; dims.len()];
    for (flat, &count) in hist.counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let mut rest = flat;
        for ax in (0..dims.len()).rev() {
            idx[ax] = rest % dims[ax];
            rest /= dims[ax];
        }
        for (ax, &i) in idx.iter().enumerate() {
            if ax > 0 {
                s.push(' ');
            }
            write!(s, "{}", hist.lo[ax] + i as i64).unwrap();
        }
        writeln!(s, ",{count}").unwrap();
    }
    s
}

fn push_tuple<'a>(s: &mut String, vals: impl Iterator<Item = &'a i64>) {
    for (i, v) in vals.enumerate() {
        if i > 0 {
            s.push(' ');
        }
        write!(s, "{v}").unwrap();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gff::sample_prior;
    use crate::localtime::local_time_histogram;
    use crate::spectral::build_spectrum_1d;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn field_csv_round_trips_exactly() {
        let shape = LatticeShape::new(2, 2).unwrap();
        let params = ModelParams::new(shape, 2, 1.25, 0.5).unwrap();
        let spec = build_spectrum_1d(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (_, field) = sample_prior(&params, &spec, &mut rng).unwrap();
        let text = field_csv_string(&field, &params, 99);
        let back = parse_field_csv(&text).unwrap();
        assert_eq!(back.seed, 99);
        assert_eq!(back.params.beta, 1.25);
        assert_eq!(back.field, field); // Display prints round-trippable floats
    }

    #[test]
    fn field_csv_parse_rejects_garbage() {
        assert!(parse_field_csv("").is_err());
        assert!(parse_field_csv("# N=2 d=2\nsite_index\n").is_err());
        let shape = LatticeShape::new(1, 1).unwrap();
        let params = ModelParams::new(shape, 1, 1.0, 0.0).unwrap();
        let field = FieldConfiguration::zeros(&shape, 1);
        let text = field_csv_string(&field, &params, 0);
        // drop one data row
        let short: String = text.lines().take(4).map(|l| format!("{l}\n")).collect();
        assert!(parse_field_csv(&short).is_err());
    }

    #[test]
    fn histogram_csv_lists_nonzero_cells() {
        let shape = LatticeShape::new(1, 1).unwrap();
        let mut field = FieldConfiguration::zeros(&shape, 1);
        field.set_value(0, 0, -1.2);
        field.set_value(0, 1, 0.1);
        field.set_value(0, 2, 0.4);
        let hist = local_time_histogram(&field, &[-2], &[2]).unwrap();
        let text = histogram_csv_string(&hist);
        assert!(text.contains("inside=3 outside=0"));
        assert!(text.contains("-1,1\n"));
        assert!(text.contains("0,2\n"));
        assert!(!text.contains("\n1,")); // empty cells stay out
    }

    #[test]
    fn spectrum_csv_has_one_row_per_mode() {
        let shape = LatticeShape::new(1, 2).unwrap();
        let spec = build_spectrum_1d(1).unwrap();
        let text = spectrum_csv_string(&spec, &shape).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 10); // header + 9 modes
        assert_eq!(lines[1], "0,0 0,0");
        // mode (0,1) carries the 1d eigenvalue 1
        assert!(lines[2].starts_with("1,0 1,"));
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.json");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        assert!(!path.with_extension("json.tmp").exists());
    }
}
