//! Reference implementations the library is checked against. None of these
//! call into the code under test except for plain data types.
#![allow(dead_code)]

use nalgebra::DMatrix;
use specclip::dp::{self, NoisyUpdate};
use specclip::linalg::{Matrix, RngStream, StreamId};
use specclip::model::{self, Activation, Batch, MlpConfig, MlpParams};
use specclip::trainer::TrainConfig;

/// Exact product `a·b` as an unevaluated sum `hi + lo`.
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Sum of squares carried in double-double arithmetic.
pub fn sum_squares_dd(v: &[f64]) -> f64 {
    let (mut hi, mut lo) = (0.0f64, 0.0f64);
    for &x in v {
        let (p, e) = two_prod(x, x);
        let s = hi + p;
        let bp = s - hi;
        let err = (hi - (s - bp)) + (p - bp);
        hi = s;
        lo += err + e;
    }
    hi + lo
}

pub fn norm_dd(v: &[f64]) -> f64 {
    sum_squares_dd(v).sqrt()
}

pub fn to_nalgebra(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

/// Eigenvalues of `MᵀM` (or `MMᵀ`, whichever is smaller) from a symmetric
/// eigensolver, descending.
pub fn gram_eigenvalues(m: &Matrix) -> Vec<f64> {
    let a = to_nalgebra(m);
    let g = if m.rows() >= m.cols() {
        a.transpose() * &a
    } else {
        &a * a.transpose()
    };
    let mut ev: Vec<f64> = g.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Random orthogonal `n × n` matrix (QR of a Gaussian matrix).
pub fn random_orthogonal(n: usize, rng: &mut RngStream) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.standard_normal());
    g.qr().q()
}

pub fn from_nalgebra(m: &DMatrix<f64>) -> Matrix {
    let mut data = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            data.push(m[(i, j)]);
        }
    }
    Matrix::new(m.nrows(), m.ncols(), data).unwrap()
}

/// Eigenvalues at the inverse CDF of a Pareto law with density exponent
/// `zeta` on `[1, ∞)`, evaluated at the midpoints `(i − ½)/n`, descending.
pub fn pareto_spectrum(n: usize, zeta: f64) -> Vec<f64> {
    (1..=n)
        .map(|i| {
            let tail = (i as f64 - 0.5) / n as f64;
            tail.powf(-1.0 / (zeta - 1.0))
        })
        .collect()
}

/// Matrix whose squared singular values are `lambdas`, rotated by random
/// orthogonal factors.
pub fn matrix_with_spectrum(rows: usize, cols: usize, lambdas: &[f64], rng: &mut RngStream) -> Matrix {
    let k = lambdas.len();
    assert!(k <= rows.min(cols));
    let u = random_orthogonal(rows, rng);
    let v = random_orthogonal(cols, rng);
    let mut s = DMatrix::zeros(rows, cols);
    for (i, l) in lambdas.iter().enumerate() {
        s[(i, i)] = l.sqrt();
    }
    from_nalgebra(&(u * s * v.transpose()))
}

/// Per-step RDP of the subsampled Gaussian by direct numerical integration of
/// `E_{z∼N(0,σ²)}[(μ(z)/μ₀(z))^α]` with `μ = (1−q)N(0,σ²) + qN(1,σ²)`,
/// evaluated in log space on a uniform grid (trapezoid rule).
pub fn rdp_quadrature(q: f64, sigma: f64, alpha: f64) -> f64 {
    let s2 = sigma * sigma;
    let log_mu0 = |z: f64| -z * z / (2.0 * s2);
    let log_mu1 = |z: f64| -(z - 1.0) * (z - 1.0) / (2.0 * s2);
    let log_f = |z: f64| {
        let a = (1.0 - q).ln() + log_mu0(z);
        let b = q.ln() + log_mu1(z);
        let m = a.max(b);
        let log_mu = m + ((a - m).exp() + (b - m).exp()).ln();
        alpha * log_mu + (1.0 - alpha) * log_mu0(z)
    };
    // the integrand's mass lies between the two centres 0 and α
    let lo = -40.0 * sigma - 1.0;
    let hi = alpha + 40.0 * sigma + 1.0;
    let h = sigma / 200.0;
    let n = ((hi - lo) / h).ceil() as usize;
    let logs: Vec<f64> = (0..=n).map(|i| log_f(lo + i as f64 * h)).collect();
    let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (i, l) in logs.iter().enumerate() {
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        sum += w * (l - m).exp();
    }
    // normalising constant of the Gaussian density
    let log_integral = m + (sum * h).ln() - 0.5 * (2.0 * std::f64::consts::PI * s2).ln();
    log_integral / (alpha - 1.0)
}

/// Full-batch mean-loss gradient of an MLP computed layer-wise in matrix form
/// with nalgebra, returned in canonical flat order.
pub fn matrix_form_gradient(p: &MlpParams, b: &Batch) -> (Vec<f64>, f64) {
    let cfg = p.config();
    let n = b.len();
    let x = DMatrix::from_row_slice(n, b.dim(), b.features());
    let ws: Vec<DMatrix<f64>> = p.layers().iter().map(|l| to_nalgebra(&l.weights)).collect();
    let bs: Vec<Vec<f64>> = p.layers().iter().map(|l| l.bias.clone()).collect();

    // forward: A_0 = X, Z_l = A_{l-1} W_lᵀ + 1 b_lᵀ
    let mut acts = vec![x];
    let mut pres = Vec::new();
    for (li, w) in ws.iter().enumerate() {
        let mut z = &acts[li] * w.transpose();
        for mut row in z.row_iter_mut() {
            for (v, bb) in row.iter_mut().zip(&bs[li]) {
                *v += bb;
            }
        }
        let a = if li + 1 == ws.len() {
            z.clone()
        } else {
            z.map(|v| match cfg.activation {
                Activation::Relu => v.max(0.0),
                Activation::Tanh => v.tanh(),
            })
        };
        pres.push(z);
        acts.push(a);
    }

    let logits = acts.last().unwrap();
    let classes = logits.ncols();
    let mut delta = DMatrix::zeros(n, classes);
    let mut loss = 0.0;
    for i in 0..n {
        let row: Vec<f64> = logits.row(i).iter().copied().collect();
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = row.iter().map(|v| (v - m).exp()).sum();
        let y = b.labels()[i];
        loss += s.ln() + m - row[y];
        for c in 0..classes {
            delta[(i, c)] = ((row[c] - m).exp() / s - if c == y { 1.0 } else { 0.0 }) / n as f64;
        }
    }

    let mut grads_w = vec![DMatrix::zeros(0, 0); ws.len()];
    let mut grads_b = vec![Vec::new(); ws.len()];
    for li in (0..ws.len()).rev() {
        grads_w[li] = delta.transpose() * &acts[li];
        grads_b[li] = (0..delta.ncols()).map(|c| delta.column(c).sum()).collect();
        if li > 0 {
            let back = &delta * &ws[li];
            let z = &pres[li - 1];
            delta = back.zip_map(z, |g, zv| {
                g * match cfg.activation {
                    Activation::Relu => {
                        if zv > 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    Activation::Tanh => 1.0 - zv.tanh().powi(2),
                }
            });
        }
    }
    let mut flat = Vec::new();
    for li in 0..ws.len() {
        let g = &grads_w[li];
        for r in 0..g.nrows() {
            for c in 0..g.ncols() {
                flat.push(g[(r, c)]);
            }
        }
        flat.extend_from_slice(&grads_b[li]);
    }
    (flat, loss / n as f64)
}

/// Fixed-threshold DP-SGD written directly from the mechanism primitives,
/// consuming the same named streams as the trainer. Returns the final
/// parameters, the released updates per step (`None` when skipped) and the
/// per-step batch losses.
pub struct ReferenceRun {
    pub params: MlpParams,
    pub releases: Vec<Option<Vec<f64>>>,
    pub losses: Vec<f64>,
}

pub fn reference_dp_sgd(cfg: &TrainConfig, data: &Batch, clip: f64, noise_on_skip: bool) -> ReferenceRun {
    let mut init = RngStream::new(cfg.seeds.init, StreamId::Init);
    let mut sub = RngStream::new(cfg.seeds.subsample, StreamId::Subsample);
    let mut noise = RngStream::new(cfg.seeds.noise, StreamId::Noise);
    let mut params = model::init_params(&cfg.model, &mut init).unwrap();
    let mut releases = Vec::new();
    let mut losses = Vec::new();
    for t in 0..cfg.privacy.total_steps {
        let idx = dp::poisson_subsample(data.len(), cfg.privacy.q, &mut sub);
        if idx.is_empty() {
            if noise_on_skip {
                for _ in 0..params.dim() {
                    noise.standard_normal();
                }
            }
            releases.push(None);
            losses.push(f64::NAN);
            continue;
        }
        let batch = data.select(&idx);
        let (g, l) = params.per_example_grads(&batch).unwrap();
        losses.push(l.iter().sum::<f64>() / l.len() as f64);
        match dp::noisy_average(&g, clip, cfg.privacy.sigma, &mut noise) {
            NoisyUpdate::Released { g_tilde, .. } => {
                params.apply_update_mut(&g_tilde, cfg.lr_schedule.at(t)).unwrap();
                releases.push(Some(g_tilde));
            }
            NoisyUpdate::Skipped => unreachable!(),
        }
    }
    ReferenceRun {
        params,
        releases,
        losses,
    }
}

/// Replays a run from the primitives, clipping step `t` at `clips[t]`.
pub fn replay_with_clips(cfg: &TrainConfig, data: &Batch, clips: &[f64], noise_on_skip: bool) -> MlpParams {
    let mut sub = RngStream::new(cfg.seeds.subsample, StreamId::Subsample);
    let mut noise = RngStream::new(cfg.seeds.noise, StreamId::Noise);
    let mut params = model::init_params(&cfg.model, &mut RngStream::new(cfg.seeds.init, StreamId::Init)).unwrap();
    for (t, &c) in clips.iter().enumerate() {
        let idx = dp::poisson_subsample(data.len(), cfg.privacy.q, &mut sub);
        if idx.is_empty() {
            if noise_on_skip {
                for _ in 0..params.dim() {
                    noise.standard_normal();
                }
            }
            continue;
        }
        let (g, _) = params.per_example_grads(&data.select(&idx)).unwrap();
        let out = dp::noisy_average(&g, c, cfg.privacy.sigma, &mut noise);
        params.apply_update_mut(out.g_tilde().unwrap(), cfg.lr_schedule.at(t)).unwrap();
    }
    params
}

/// Two-class / multi-class blobs drawn here rather than by the harness.
pub fn toy_batch(n: usize, dim: usize, classes: usize, seed: u64) -> Batch {
    let mut rng = RngStream::new(seed, StreamId::Custom(77));
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % classes;
        for j in 0..dim {
            let shift = if j % classes == y { 1.5 } else { 0.0 };
            features.push(shift + rng.standard_normal());
        }
        labels.push(y);
    }
    Batch::new(dim, features, labels).unwrap()
}

pub fn small_mlp(dim: usize, hidden: &[usize], classes: usize, act: Activation) -> MlpConfig {
    let mut layer_sizes = vec![dim];
    layer_sizes.extend_from_slice(hidden);
    layer_sizes.push(classes);
    MlpConfig {
        layer_sizes,
        activation: act,
        loss: specclip::model::LossKind::SoftmaxCrossEntropy,
    }
}

pub fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}
