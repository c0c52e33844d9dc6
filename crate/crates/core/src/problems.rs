//! Reproducible synthetic test problems and their on-disk bundle format.
//!
//! A bundle directory holds `meta.json`, the little-endian payloads
//! `b.f64le`, `x_true.f64le` and `noise.f64le`, and the operator payload
//! (`A.f64le`, column-major, or `rows.u32le` for a partial DCT).

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{
    make_dense_gaussian, make_partial_dct, LinearOperator, MatvecLedger, OperatorKind,
};
use crate::vecops::norm2;

pub const FORMAT_VERSION: u32 = 1;

const TAG_OPERATOR: u64 = 0x6f70_6572_6174_6f72; // "operator"
const TAG_SIGNAL: u64 = 0x0073_6967_6e61_6c00; // "signal"
const TAG_NOISE: u64 = 0x0000_006e_6f69_7365; // "noise"

/// splitmix64 finalizer applied to `master ^ tag`.
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    let mut z = (master ^ tag).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// How nonzero magnitudes are spread over the dynamic range.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagnitudeLaw {
    /// `10^((d/20) i/(s-1))` for `i = 0..s-1`.
    #[default]
    LogGrid,
    /// Exponents uniform in `[0, d/20]`, with both endpoints always present.
    UniformExponent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub n: usize,
    /// Number of nonzeros; 0 selects the power-law (approximately sparse) mode.
    pub s: usize,
    pub dynamic_range_db: f64,
    pub decay_exponent: f64,
    pub seed: u64,
    #[serde(default)]
    pub magnitude_law: MagnitudeLaw,
}

impl SignalSpec {
    pub fn sparse(n: usize, s: usize, dynamic_range_db: f64, seed: u64) -> Self {
        Self {
            n,
            s,
            dynamic_range_db,
            decay_exponent: 1.0,
            seed,
            magnitude_law: MagnitudeLaw::LogGrid,
        }
    }

    pub fn power_law(n: usize, decay_exponent: f64, seed: u64) -> Self {
        Self {
            n,
            s: 0,
            dynamic_range_db: 0.0,
            decay_exponent,
            seed,
            magnitude_law: MagnitudeLaw::LogGrid,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidDimension("signal length n = 0".into()));
        }
        if self.s > self.n {
            return Err(Error::Domain(format!(
                "sparsity s = {} exceeds n = {}",
                self.s, self.n
            )));
        }
        if !(self.dynamic_range_db >= 0.0) || !self.dynamic_range_db.is_finite() {
            return Err(Error::Domain(format!(
                "dynamic range must be >= 0 dB, got {}",
                self.dynamic_range_db
            )));
        }
        Ok(())
    }
}

/// Exactly `s`-sparse signal with max/min magnitude ratio `10^(d/20)`.
pub fn gen_sparse_signal(spec: &SignalSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let s = spec.s;
    if s == 0 {
        return Err(Error::Domain("sparse signal needs s >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let support = rand::seq::index::sample(&mut rng, spec.n, s).into_vec();

    let top = spec.dynamic_range_db / 20.0;
    let mut magnitudes: Vec<f64> = match spec.magnitude_law {
        MagnitudeLaw::LogGrid => (0..s)
            .map(|i| {
                if s == 1 {
                    1.0
                } else {
                    // i / (s-1) is exactly 1 at the top, so the ratio is exactly 10^(d/20)
                    10f64.powf(top * (i as f64 / (s - 1) as f64))
                }
            })
            .collect(),
        MagnitudeLaw::UniformExponent => (0..s)
            .map(|i| match i {
                0 => 1.0,
                _ if i == s - 1 => 10f64.powf(top),
                _ => 10f64.powf(top * rng.random::<f64>()),
            })
            .collect(),
    };
    magnitudes.shuffle(&mut rng);

    let mut x = vec![0.0; spec.n];
    for (&idx, mag) in support.iter().zip(magnitudes) {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        x[idx] = sign * mag;
    }
    Ok(x)
}

/// Dense signal whose sorted magnitudes are `i^-p`, randomly permuted, with random signs.
pub fn gen_approx_sparse_signal(spec: &SignalSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    if !(spec.decay_exponent > 0.0) {
        return Err(Error::Domain(format!(
            "decay exponent must be positive, got {}",
            spec.decay_exponent
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut x: Vec<f64> = (1..=spec.n)
        .map(|i| (i as f64).powf(-spec.decay_exponent))
        .collect();
    x.shuffle(&mut rng);
    for v in x.iter_mut() {
        if rng.random::<bool>() {
            *v = -*v;
        }
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    pub m: usize,
    pub normalize_columns: bool,
}

#[derive(Debug, Clone)]
pub struct ProblemBundle {
    pub op: LinearOperator,
    pub b: Vec<f64>,
    pub x_true: Vec<f64>,
    pub noise: Vec<f64>,
    /// `||noise||_2` of the realized noise.
    pub sigma_true: f64,
    pub spec: SignalSpec,
    /// Requested per-entry noise standard deviation.
    pub noise_sigma: f64,
}

/// Builds operator, signal and noise from independent sub-seeds of `spec.seed`.
pub fn assemble(
    spec: &SignalSpec,
    op_spec: &OperatorSpec,
    noise_sigma: f64,
) -> Result<ProblemBundle> {
    spec.validate()?;
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(Error::Domain(format!(
            "noise sigma must be >= 0, got {noise_sigma}"
        )));
    }
    let master = spec.seed;
    let op_seed = derive_seed(master, TAG_OPERATOR);
    let op = match op_spec.kind {
        OperatorKind::Dense => {
            make_dense_gaussian(op_spec.m, spec.n, op_seed, op_spec.normalize_columns)?
        }
        OperatorKind::PartialDct => make_partial_dct(op_spec.m, spec.n, op_seed)?,
    };

    let signal_spec = SignalSpec {
        seed: derive_seed(master, TAG_SIGNAL),
        ..*spec
    };
    let x_true = if spec.s == 0 {
        gen_approx_sparse_signal(&signal_spec)?
    } else {
        gen_sparse_signal(&signal_spec)?
    };

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master, TAG_NOISE));
    let noise: Vec<f64> = (0..op_spec.m)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            noise_sigma * z
        })
        .collect();
    let mut b = op.apply(&x_true, &mut MatvecLedger::new())?;
    for (bi, ni) in b.iter_mut().zip(&noise) {
        *bi += ni;
    }
    let sigma_true = norm2(&noise);
    Ok(ProblemBundle {
        op,
        b,
        x_true,
        noise,
        sigma_true,
        spec: *spec,
        noise_sigma,
    })
}

/// Contents of `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub format_version: u32,
    pub kind: OperatorKind,
    pub m: usize,
    pub n: usize,
    pub s: usize,
    pub dynamic_range_db: f64,
    pub decay_exponent: f64,
    pub noise_sigma: f64,
    pub sigma_true: f64,
    pub seed: u64,
}

pub const META_FILE: &str = "meta.json";
pub const B_FILE: &str = "b.f64le";
pub const X_TRUE_FILE: &str = "x_true.f64le";
pub const NOISE_FILE: &str = "noise.f64le";
pub const DENSE_FILE: &str = "A.f64le";
pub const ROWS_FILE: &str = "rows.u32le";

pub fn save_bundle(bundle: &ProblemBundle, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = BundleMeta {
        format_version: FORMAT_VERSION,
        kind: bundle.op.kind(),
        m: bundle.op.rows(),
        n: bundle.op.cols(),
        s: bundle.spec.s,
        dynamic_range_db: bundle.spec.dynamic_range_db,
        decay_exponent: bundle.spec.decay_exponent,
        noise_sigma: bundle.noise_sigma,
        sigma_true: bundle.sigma_true,
        seed: bundle.spec.seed,
    };
    let mut json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    json.push('\n');
    write_file(&dir.join(META_FILE), json.as_bytes())?;
    write_f64s(&dir.join(B_FILE), &bundle.b)?;
    write_f64s(&dir.join(X_TRUE_FILE), &bundle.x_true)?;
    write_f64s(&dir.join(NOISE_FILE), &bundle.noise)?;
    match bundle.op.kind() {
        OperatorKind::Dense => write_f64s(
            &dir.join(DENSE_FILE),
            bundle.op.dense_payload().expect("dense"),
        )?,
        OperatorKind::PartialDct => {
            let rows = bundle.op.dct_rows().expect("pdct");
            let bytes: Vec<u8> = rows.iter().flat_map(|r| r.to_le_bytes()).collect();
            write_file(&dir.join(ROWS_FILE), &bytes)?;
        }
    }
    Ok(())
}

pub fn load_bundle(dir: &Path) -> Result<ProblemBundle> {
    let meta_path = dir.join(META_FILE);
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: BundleMeta =
        serde_json::from_str(&text).map_err(|e| Error::load(&meta_path, e.to_string()))?;
    if meta.format_version != FORMAT_VERSION {
        return Err(Error::load(
            &meta_path,
            format!("unsupported format_version {}", meta.format_version),
        ));
    }
    if meta.m == 0 || meta.n == 0 || meta.m > meta.n || meta.s > meta.n {
        return Err(Error::load(
            &meta_path,
            format!(
                "inconsistent dimensions m = {}, n = {}, s = {}",
                meta.m, meta.n, meta.s
            ),
        ));
    }
    let b = read_f64s(&dir.join(B_FILE), meta.m)?;
    let x_true = read_f64s(&dir.join(X_TRUE_FILE), meta.n)?;
    let noise = read_f64s(&dir.join(NOISE_FILE), meta.m)?;
    let op_seed = derive_seed(meta.seed, TAG_OPERATOR);
    let op = match meta.kind {
        OperatorKind::Dense => {
            let path = dir.join(DENSE_FILE);
            let data = read_f64s(&path, meta.m * meta.n)?;
            LinearOperator::from_dense(meta.m, meta.n, data)
                .map_err(|e| Error::load(&path, e.to_string()))?
        }
        OperatorKind::PartialDct => {
            let path = dir.join(ROWS_FILE);
            let bytes = read_exact_len(&path, 4 * meta.m, meta.m, "u32")?;
            let rows = bytes
                .chunks_exact(4)
                .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            LinearOperator::from_dct_rows(meta.n, rows)
                .map_err(|e| Error::load(&path, e.to_string()))?
        }
    }
    .with_seed(op_seed);
    let spec = SignalSpec {
        n: meta.n,
        s: meta.s,
        dynamic_range_db: meta.dynamic_range_db,
        decay_exponent: meta.decay_exponent,
        seed: meta.seed,
        magnitude_law: MagnitudeLaw::LogGrid,
    };
    Ok(ProblemBundle {
        op,
        b,
        x_true,
        noise,
        sigma_true: meta.sigma_true,
        spec,
        noise_sigma: meta.noise_sigma,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_f64s(path: &Path, values: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    write_file(path, &bytes)
}

/// Reads exactly `count` little-endian f64 values.
pub fn read_f64s(path: &Path, count: usize) -> Result<Vec<f64>> {
    let bytes = read_exact_len(path, 8 * count, count, "f64")?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

fn read_exact_len(path: &Path, expected: usize, count: usize, ty: &str) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(PathBuf::from(path), e))?;
    if bytes.len() != expected {
        return Err(Error::load(
            path,
            format!(
                "expected {expected} bytes ({count} {ty} values), found {}",
                bytes.len()
            ),
        ));
    }
    Ok(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nonzero_mags(x: &[f64]) -> Vec<f64> {
        x.iter().filter(|v| **v != 0.0).map(|v| v.abs()).collect()
    }

    #[test]
    fn zero_db_gives_unit_magnitudes() {
        let x = gen_sparse_signal(&SignalSpec::sparse(50, 7, 0.0, 3)).unwrap();
        let mags = nonzero_mags(&x);
        assert_eq!(mags.len(), 7);
        assert!(mags.iter().all(|m| *m == 1.0));
    }

    #[test]
    fn twenty_db_pair() {
        let x = gen_sparse_signal(&SignalSpec::sparse(10, 2, 20.0, 1)).unwrap();
        let mut mags = nonzero_mags(&x);
        mags.sort_by(f64::total_cmp);
        assert_eq!(mags, vec![1.0, 10.0]);
    }

    #[test]
    fn exact_dynamic_range() {
        for (d, s) in [(20.0, 5), (40.0, 17), (60.0, 204), (100.0, 33), (37.5, 9)] {
            let x = gen_sparse_signal(&SignalSpec::sparse(1000, s, d, 8)).unwrap();
            let mags = nonzero_mags(&x);
            let max = mags.iter().cloned().fold(0.0, f64::max);
            let min = mags.iter().cloned().fold(f64::INFINITY, f64::min);
            assert_eq!(max / min, 10f64.powf(d / 20.0));
        }
        let spec = SignalSpec {
            magnitude_law: MagnitudeLaw::UniformExponent,
            ..SignalSpec::sparse(100, 10, 60.0, 2)
        };
        let mags = nonzero_mags(&gen_sparse_signal(&spec).unwrap());
        let max = mags.iter().cloned().fold(0.0, f64::max);
        let min = mags.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(max / min, 1000.0);
    }

    #[test]
    fn sparse_signal_errors() {
        assert!(matches!(
            gen_sparse_signal(&SignalSpec::sparse(5, 6, 0.0, 1)),
            Err(Error::Domain(_))
        ));
        assert!(gen_sparse_signal(&SignalSpec::sparse(5, 0, 0.0, 1)).is_err());
        assert!(gen_sparse_signal(&SignalSpec::sparse(5, 2, -1.0, 1)).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SignalSpec::sparse(300, 20, 40.0, 99);
        assert_eq!(
            gen_sparse_signal(&spec).unwrap(),
            gen_sparse_signal(&spec).unwrap()
        );
        let other = SignalSpec { seed: 100, ..spec };
        assert_ne!(
            gen_sparse_signal(&spec).unwrap(),
            gen_sparse_signal(&other).unwrap()
        );
    }

    #[test]
    fn power_law_magnitudes() {
        let n = 1000;
        let x = gen_approx_sparse_signal(&SignalSpec::power_law(n, 1.0, 4)).unwrap();
        let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(mags[0], 1.0);
        assert_eq!(mags[9], 0.1);
        // harmonic number by direct summation, smallest terms first
        let harmonic: f64 = (1..=n).rev().map(|i| 1.0 / i as f64).sum();
        let l1: f64 = x.iter().map(|v| v.abs()).sum();
        assert!((l1 - harmonic).abs() <= 1e-9);
        assert!(gen_approx_sparse_signal(&SignalSpec::power_law(10, 0.0, 1)).is_err());
    }

    #[test]
    fn noiseless_bundle() {
        let spec = SignalSpec::sparse(64, 5, 20.0, 11);
        let op_spec = OperatorSpec {
            kind: OperatorKind::Dense,
            m: 32,
            normalize_columns: true,
        };
        let bundle = assemble(&spec, &op_spec, 0.0).unwrap();
        assert_eq!(bundle.sigma_true, 0.0);
        let ax = bundle
            .op
            .apply(&bundle.x_true, &mut MatvecLedger::new())
            .unwrap();
        assert_eq!(ax, bundle.b);
    }

    #[test]
    fn sigma_true_follows_chi_distribution() {
        // ||noise||_2 / sigma ~ chi_m with mean ~ sqrt(m - 1/2) and std ~ 1/sqrt(2)
        let m = 64usize;
        let sigma = 0.1;
        let op_spec = OperatorSpec {
            kind: OperatorKind::PartialDct,
            m,
            normalize_columns: false,
        };
        let mean = (m as f64 - 0.5).sqrt();
        let sd = (m as f64 - mean * mean).sqrt();
        let mut sum = 0.0;
        for seed in 0..100 {
            let b = assemble(&SignalSpec::sparse(128, 4, 0.0, seed), &op_spec, sigma).unwrap();
            let z = b.sigma_true / sigma;
            assert!((z - mean).abs() <= 4.0 * sd, "seed {seed}: {z}");
            assert!((b.sigma_true - norm2(&b.noise)).abs() <= 1e-15);
            sum += z;
        }
        assert!((sum / 100.0 - mean).abs() <= 4.0 * sd / 10.0);
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for (kind, sub) in [
            (OperatorKind::Dense, "dense"),
            (OperatorKind::PartialDct, "pdct"),
        ] {
            let path = dir.path().join(sub);
            let spec = SignalSpec::sparse(128, 6, 40.0, 5);
            let op_spec = OperatorSpec {
                kind,
                m: 40,
                normalize_columns: true,
            };
            let bundle = assemble(&spec, &op_spec, 0.1).unwrap();
            save_bundle(&bundle, &path).unwrap();
            let back = load_bundle(&path).unwrap();
            assert_eq!(back.b, bundle.b);
            assert_eq!(back.x_true, bundle.x_true);
            assert_eq!(back.noise, bundle.noise);
            assert_eq!(back.sigma_true.to_bits(), bundle.sigma_true.to_bits());
            assert_eq!(back.spec, bundle.spec);
            assert_eq!(back.noise_sigma, bundle.noise_sigma);
            assert_eq!(back.op.kind(), kind);
            assert_eq!(back.op.seed(), bundle.op.seed());
            assert_eq!(back.op.dense_payload(), bundle.op.dense_payload());
            assert_eq!(back.op.dct_rows(), bundle.op.dct_rows());
        }
    }

    #[test]
    fn truncated_payload_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SignalSpec::sparse(64, 4, 0.0, 2);
        let op_spec = OperatorSpec {
            kind: OperatorKind::PartialDct,
            m: 16,
            normalize_columns: false,
        };
        save_bundle(&assemble(&spec, &op_spec, 0.1).unwrap(), dir.path()).unwrap();
        let b_path = dir.path().join(B_FILE);
        let bytes = fs::read(&b_path).unwrap();
        fs::write(&b_path, &bytes[..bytes.len() - 3]).unwrap();
        let err = load_bundle(dir.path()).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("b.f64le") && msg.contains("expected 128 bytes"),
            "{msg}"
        );
    }

    #[test]
    fn inconsistent_metadata_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SignalSpec::sparse(64, 4, 0.0, 2);
        let op_spec = OperatorSpec {
            kind: OperatorKind::Dense,
            m: 16,
            normalize_columns: false,
        };
        save_bundle(&assemble(&spec, &op_spec, 0.1).unwrap(), dir.path()).unwrap();
        let meta_path = dir.path().join(META_FILE);
        let text = fs::read_to_string(&meta_path)
            .unwrap()
            .replace("\"m\": 16", "\"m\": 17");
        fs::write(&meta_path, text).unwrap();
        assert!(matches!(load_bundle(dir.path()), Err(Error::Load { .. })));
    }
}
