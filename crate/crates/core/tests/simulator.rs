//! Simulator-level properties: transmission-matrix construction against a
//! scalar oracle, singular spectrum shape, speckle grain versus mode count,
//! and drift decorrelation.

use fibrelens_core::dataset::{random_pattern, write_spkl, Frame, ImagePlane};
use fibrelens_core::fibresim::{batch_transmit, generate_fibre, measure, propagate, FibreConfig};
use fibrelens_core::matrix::ComplexMatrix;
use fibrelens_core::metrics::MetricParams;
use fibrelens_core::pipeline::decorrelation_series;

fn cfg(input: usize, output: usize, modes: usize, seed: u64) -> FibreConfig {
    FibreConfig {
        input_pixels: input,
        output_pixels: output,
        mode_count: modes,
        noise_floor: 0.0,
        quant_levels: 100,
        rng_seed: seed,
    }
}

// ---------------------------------------------------------------------------
// Spectrum oracle: cyclic Jacobi eigensolver on the real symmetric embedding
// of the Hermitian Gram matrix T^H T. Test-only; independent of the library's
// linear algebra.
// ---------------------------------------------------------------------------

fn gram_embedding(t: &ComplexMatrix) -> Vec<Vec<f64>> {
    let n = t.cols();
    // G = T^H T (Hermitian): G_re symmetric, G_im antisymmetric.
    let mut g_re = vec![vec![0.0f64; n]; n];
    let mut g_im = vec![vec![0.0f64; n]; n];
    for a in 0..n {
        for b in 0..n {
            let mut re = 0.0f64;
            let mut im = 0.0f64;
            for r in 0..t.rows() {
                let x = t.at(r, a);
                let y = t.at(r, b);
                // conj(x) * y
                re += x.re as f64 * y.re as f64 + x.im as f64 * y.im as f64;
                im += x.re as f64 * y.im as f64 - x.im as f64 * y.re as f64;
            }
            g_re[a][b] = re;
            g_im[a][b] = im;
        }
    }
    // Real symmetric embedding [[Re, -Im], [Im, Re]]; every eigenvalue of G
    // appears twice.
    let mut m = vec![vec![0.0f64; 2 * n]; 2 * n];
    for a in 0..n {
        for b in 0..n {
            m[a][b] = g_re[a][b];
            m[a][n + b] = -g_im[a][b];
            m[n + a][b] = g_im[a][b];
            m[n + a][n + b] = g_re[a][b];
        }
    }
    m
}

/// Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.
fn jacobi_eigenvalues(mut m: Vec<Vec<f64>>) -> Vec<f64> {
    let n = m.len();
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[p][q] * m[p][q];
            }
        }
        if off < 1e-22 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p][q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[p][p];
                let aqq = m[q][q];
                let theta = 0.5 * (aqq - app).atan2(2.0 * apq)
                    * if (aqq - app).abs() > 0.0 || apq != 0.0 { 1.0 } else { 0.0 };
                let (s, c) = {
                    // Classic stable rotation computation.
                    let tau = (aqq - app) / (2.0 * apq);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        1.0 / (tau - (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    (t * c, c)
                };
                let _ = theta;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    eig
}

/// Squared singular values of `t` (descending) via the Jacobi oracle.
fn singular_values_squared(t: &ComplexMatrix) -> Vec<f64> {
    let doubled = jacobi_eigenvalues(gram_embedding(t));
    // Eigenvalues arrive in duplicated pairs; keep one of each.
    doubled.into_iter().step_by(2).collect()
}

#[test]
fn generate_fibre_matches_scalar_draw_oracle() {
    // Redraw both factors with the documented RNG recipe and multiply with
    // a brute-force triple loop.
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Distribution, Normal};

    let c = cfg(16, 36, 4, 123);
    let t = generate_fibre(&c).unwrap();

    let side = 6usize;
    let modes = 4usize;
    let f: i64 = 1; // smallest f with (2f+1)^2 >= 4
    let band = (2 * f + 1) as usize;
    let q = band * band;
    let pixels = side * side;

    let mut rng = ChaCha12Rng::seed_from_u64(123);
    let coeff_std = (1.0 / (q as f64 * pixels as f64) / 2.0).sqrt();
    let normal = Normal::new(0.0f64, coeff_std).unwrap();
    let mut weights = Vec::new();
    for _ in 0..modes * q {
        let re = normal.sample(&mut rng);
        let im = normal.sample(&mut rng);
        weights.push((re, im));
    }
    // Mode profiles at each pixel.
    let mut a = vec![vec![(0.0f64, 0.0f64); modes]; pixels];
    for k in 0..modes {
        for (w_idx, &(gre, gim)) in weights[k * q..(k + 1) * q].iter().enumerate() {
            let fy = w_idx as i64 / band as i64 - f;
            let fx = w_idx as i64 % band as i64 - f;
            for y in 0..side {
                for x in 0..side {
                    let phase = 2.0 * std::f64::consts::PI
                        * (fy as f64 * y as f64 + fx as f64 * x as f64)
                        / side as f64;
                    let (sin, cos) = phase.sin_cos();
                    let cell = &mut a[y * side + x][k];
                    cell.0 += gre * cos - gim * sin;
                    cell.1 += gre * sin + gim * cos;
                }
            }
        }
    }
    let b_std = (1.0 / modes as f64 / 2.0).sqrt();
    let b_normal = Normal::new(0.0f64, b_std).unwrap();
    let mut b = vec![vec![(0.0f64, 0.0f64); 16]; modes];
    for row in b.iter_mut() {
        for cell in row.iter_mut() {
            cell.0 = b_normal.sample(&mut rng);
            cell.1 = b_normal.sample(&mut rng);
        }
    }

    // Brute-force product, f32-rounded factors like the implementation uses.
    for i in 0..pixels {
        for j in 0..16 {
            let mut re = 0.0f64;
            let mut im = 0.0f64;
            for k in 0..modes {
                let (ar, ai) = (a[i][k].0 as f32 as f64, a[i][k].1 as f32 as f64);
                let (br, bi) = (b[k][j].0 as f32 as f64, b[k][j].1 as f32 as f64);
                re += ar * br - ai * bi;
                im += ar * bi + ai * br;
            }
            let got = t.at(i, j);
            assert!(
                (got.re as f64 - re).abs() < 1e-6 && (got.im as f64 - im).abs() < 1e-6,
                "({i},{j}): got {got:?}, want ({re}, {im})"
            );
        }
    }
}

#[test]
fn spectrum_has_expected_rank_mass_and_edge() {
    // Tall instance: 144 outputs, 64 inputs, 16 modes.
    let t = generate_fibre(&cfg(64, 144, 16, 7)).unwrap();
    let spectrum = singular_values_squared(&t);
    assert_eq!(spectrum.len(), 64);

    let top = spectrum[0];
    let mass: f64 = spectrum.iter().sum();
    let nonzero = spectrum.iter().filter(|&&s| s > top * 1e-9).count();
    assert_eq!(nonzero, 16, "rank should equal mode count");
    for &tail in &spectrum[16..] {
        assert!(tail < top * 1e-9, "tail eigenvalue {tail:.3e}");
    }
    // Expected Frobenius mass is the input pixel count.
    assert!(
        (mass - 64.0).abs() < 0.25 * 64.0,
        "spectral mass {mass:.2} far from 64"
    );
    // Generous random-matrix edge for the factor product.
    assert!(top < 45.0, "top squared singular value {top:.2}");
}

#[test]
fn spectrum_square_case_bulk() {
    // mode_count equal to input count: the bulk spreads with no rank gap.
    let t = generate_fibre(&cfg(64, 256, 64, 9)).unwrap();
    let spectrum = singular_values_squared(&t);
    let mass: f64 = spectrum.iter().sum();
    assert!(
        (mass - 64.0).abs() < 0.25 * 64.0,
        "spectral mass {mass:.2} far from 64"
    );
    assert!(spectrum[0] < 25.0, "top squared singular value {:.2}", spectrum[0]);
    // Square-ratio products have vanishing lower edge: the bottom quartile
    // must collapse relative to the top.
    let bottom = spectrum[48];
    assert!(bottom < spectrum[0] * 0.05, "bottom {bottom:.3e}");
}

// ---------------------------------------------------------------------------
// Speckle texture
// ---------------------------------------------------------------------------

/// Mean autocorrelation width of a frame: first row-lag where the normalized
/// intensity autocovariance drops below one half, linearly interpolated.
fn autocorrelation_width(frame: &Frame) -> f64 {
    let side = frame.width();
    let v = frame.values();
    let n = v.len() as f64;
    let mean = v.iter().map(|&x| x as f64).sum::<f64>() / n;
    let var = v.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
    let mut prev = 1.0f64;
    for lag in 1..side / 2 {
        let mut acc = 0.0f64;
        let mut count = 0usize;
        for y in 0..side {
            let row = &v[y * side..(y + 1) * side];
            for x in 0..side - lag {
                acc += (row[x] as f64 - mean) * (row[x + lag] as f64 - mean);
                count += 1;
            }
        }
        let rho = acc / count as f64 / var;
        if rho < 0.5 {
            // Linear interpolation between the previous and current lag.
            let frac = (prev - 0.5) / (prev - rho);
            return (lag - 1) as f64 + frac;
        }
        prev = rho;
    }
    (side / 2) as f64
}

#[test]
fn speckle_grain_shrinks_with_mode_count() {
    let image = random_pattern(16, 5);
    let mut widths = Vec::new();
    for modes in [16usize, 64, 256] {
        let c = cfg(256, 4096, modes, 77);
        let t = generate_fibre(&c).unwrap();
        let frame = propagate(&t, &image).unwrap();
        widths.push(autocorrelation_width(&frame));
    }
    assert!(
        widths[0] > widths[1] && widths[1] > widths[2],
        "widths not monotone: {widths:?}"
    );
}

#[test]
fn propagate_scales_quadratically_with_field() {
    // |T (alpha s)|^2 = alpha^2 |T s|^2 on the noiseless path.
    let c = cfg(64, 64, 32, 3);
    let t = generate_fibre(&c).unwrap();
    let base = random_pattern(8, 21);
    let alpha2 = 0.25f32; // image scaled by alpha^2 scales the field by alpha
    let scaled = ImagePlane::new(
        8,
        8,
        base.values().iter().map(|&v| v * alpha2).collect(),
    )
    .unwrap();
    let out_base = propagate(&t, &base).unwrap();
    let out_scaled = propagate(&t, &scaled).unwrap();
    for (&a, &b) in out_base.values().iter().zip(out_scaled.values()) {
        assert!(
            (b - alpha2 * a).abs() <= 1e-5 * a.max(1e-3),
            "{b} vs {}",
            alpha2 * a
        );
    }
}

// ---------------------------------------------------------------------------
// Decorrelation
// ---------------------------------------------------------------------------

#[test]
fn independent_fibres_decorrelate_to_near_zero() {
    let image = random_pattern(16, 1);
    let c0 = cfg(256, 14400, 128, 100);
    let c1 = cfg(256, 14400, 128, 200);
    let t0 = generate_fibre(&c0).unwrap();
    let t1 = generate_fibre(&c1).unwrap();
    let f0 = measure(&propagate(&t0, &image).unwrap(), &c0);
    let f1 = measure(&propagate(&t1, &image).unwrap(), &c1);
    let series = decorrelation_series(&[f0, f1], &MetricParams::default()).unwrap();
    assert_eq!(series[0].1, 1.0);
    assert!(
        series[1].1.abs() < 0.1,
        "independent speckle SSIM {:.4}",
        series[1].1
    );
}

#[test]
fn interpolated_drift_decays_monotonically() {
    let image = random_pattern(16, 2);
    let c0 = cfg(256, 14400, 128, 300);
    let c1 = cfg(256, 14400, 128, 400);
    let t0 = generate_fibre(&c0).unwrap();
    let t1 = generate_fibre(&c1).unwrap();

    let steps = 10;
    let frames: Vec<Frame> = (0..steps)
        .map(|k| {
            let theta =
                k as f32 / (steps - 1) as f32 * std::f32::consts::FRAC_PI_4;
            let t = ComplexMatrix::scaled_add(&t0, theta.cos(), &t1, theta.sin()).unwrap();
            measure(&propagate(&t, &image).unwrap(), &c0)
        })
        .collect();
    let series = decorrelation_series(&frames, &MetricParams::default()).unwrap();
    assert_eq!(series[0].1, 1.0);
    for pair in series.windows(2) {
        assert!(
            pair[1].1 < pair[0].1,
            "series not strictly decreasing: {series:?}"
        );
    }
}

#[test]
fn batch_transmit_writes_byte_identical_spkl() {
    let c = FibreConfig {
        noise_floor: 0.01,
        ..cfg(64, 100, 32, 17)
    };
    let t = generate_fibre(&c).unwrap();
    let images: Vec<ImagePlane> = (0..40).map(|i| random_pattern(8, 600 + i)).collect();

    let dir = tempfile::tempdir().unwrap();
    let mut bytes = Vec::new();
    for run in 0..2 {
        let pairs = batch_transmit(&t, &images, &c).unwrap();
        let path = dir.path().join(format!("run{run}.spkl"));
        write_spkl(&path, &pairs).unwrap();
        bytes.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
}
