use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use lobmm_core::market_data::{fit_normalizer, normalize, synth_days, SynthParams, CLIP_BOUND};

use crate::{ensure, Outcome};

const MOMENTS: [(f64, f64); 5] = [(0.0, 1.0), (5.0, 2.0), (-300.0, 40.0), (1e-4, 3e-6), (8000.0, 0.5)];
const PER_DAY: usize = 20_000;

/// Known-moment Gaussian vectors for day `d`, plus a heavy outlier every
/// thousandth vector in the last column.
fn vectors(d: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(d);
    let normals: Vec<Normal<f64>> = MOMENTS
        .iter()
        .map(|&(m, s)| Normal::new(m, s).expect("valid"))
        .collect();
    (0..PER_DAY)
        .map(|i| {
            let mut v: Vec<f64> = normals.iter().map(|n| n.sample(&mut rng)).collect();
            let outlier = if i % 1000 == 0 {
                1e6 * if i % 2000 == 0 { 1.0 } else { -1.0 }
            } else {
                0.0
            };
            v.push(outlier);
            v
        })
        .collect()
}

pub fn known_moments() -> Outcome {
    let params = SynthParams {
        seconds: 10,
        ..SynthParams::default()
    };
    let days = synth_days(9, &params, 3);
    let mut day_idx = 0u64;
    let stats = fit_normalizer(&days, |_, sink| {
        for v in vectors(day_idx) {
            sink(&v);
        }
        day_idx += 1;
    })
    .map_err(|e| e.to_string())?;

    let cols = MOMENTS.len() + 1;
    let mut sum = vec![0.0; cols];
    let mut sq = vec![0.0; cols];
    let mut n = 0.0;
    let mut peak: f64 = 0.0;
    let mut clipped = 0usize;
    for d in 0..3 {
        for v in vectors(d) {
            let z = normalize(&stats, &v).map_err(|e| e.to_string())?;
            for (c, &x) in z.iter().enumerate() {
                sum[c] += x;
                sq[c] += x * x;
                peak = peak.max(x.abs());
                clipped += usize::from(x.abs() == CLIP_BOUND);
            }
            n += 1.0;
        }
    }
    let mut worst_mu: f64 = 0.0;
    let mut worst_sd: f64 = 0.0;
    for c in 0..MOMENTS.len() {
        let mu = sum[c] / n;
        let sd = (sq[c] / n - mu * mu).sqrt();
        ensure(mu.abs() < 0.05, || format!("column {c}: z mean {mu}"))?;
        ensure((sd - 1.0).abs() < 0.05, || format!("column {c}: z std {sd}"))?;
        worst_mu = worst_mu.max(mu.abs());
        worst_sd = worst_sd.max((sd - 1.0).abs());
    }
    ensure(peak <= CLIP_BOUND, || format!("|z| reached {peak}"))?;
    ensure(clipped > 0, || "the outlier column was never clipped".into())?;
    Ok(format!(
        "max |mean| {worst_mu:.3}, max |std - 1| {worst_sd:.3}, max |z| {peak}, {clipped} values clipped"
    ))
}
