use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{CoefficientSet, InterferometerConfig, LossConfig};

/// Linear mode transform out_i = sum_j A_ij in_j + sum_j B_ij in_j^dag.
///
/// Any product of squeezers, beam splitters, phase shifters and loss
/// couplers has this form. Physicality is encoded by A A^dag - B B^dag = I
/// together with symmetry of A B^T; `invariant_residual` measures both.
#[derive(Debug, Clone, PartialEq)]
pub struct BogoliubovTransform {
    a: Array2<Complex64>,
    b: Array2<Complex64>,
}

impl BogoliubovTransform {
    /// Identity on `n` modes.
    pub fn identity(n: usize) -> Self {
        Self {
            a: Array2::eye(n),
            b: Array2::zeros((n, n)),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.a.nrows()
    }

    pub fn a_block(&self) -> &Array2<Complex64> {
        &self.a
    }

    pub fn b_block(&self) -> &Array2<Complex64> {
        &self.b
    }

    /// Two-mode squeezer on modes (i, j) of an `n`-mode register:
    /// out_i = G in_i + g e^{i theta} in_j^dag and symmetrically for j.
    pub fn two_mode_squeezer(
        g_big: f64,
        g_small: f64,
        theta: f64,
        i: usize,
        j: usize,
        n: usize,
    ) -> Result<Self> {
        check_mode_pair(i, j, n)?;
        if !g_big.is_finite() || g_big < 1.0 || g_small < 0.0 {
            return Err(Error::InvalidGain(g_big));
        }
        if (g_big * g_big - g_small * g_small - 1.0).abs() > 1e-12 * (1.0 + g_big * g_big) {
            return Err(Error::InvalidGain(g_big));
        }
        let mut t = Self::identity(n);
        let phase = Complex64::from_polar(g_small, theta);
        t.a[(i, i)] = Complex64::from(g_big);
        t.a[(j, j)] = Complex64::from(g_big);
        t.b[(i, j)] = phase;
        t.b[(j, i)] = phase;
        Ok(t)
    }

    /// Beam splitter on modes (i, j): out_i = sqrt(T) in_i + sqrt(R) in_j,
    /// out_j = -sqrt(R) in_i + sqrt(T) in_j.
    pub fn beam_splitter(t: f64, r: f64, i: usize, j: usize, n: usize) -> Result<Self> {
        check_mode_pair(i, j, n)?;
        let ok = t.is_finite()
            && r.is_finite()
            && (0.0..=1.0).contains(&t)
            && (0.0..=1.0).contains(&r)
            && (t + r - 1.0).abs() <= 1e-12;
        if !ok {
            return Err(Error::InvalidSplit { t, r });
        }
        let mut tr = Self::identity(n);
        let (ct, cr) = (Complex64::from(t.sqrt()), Complex64::from(r.sqrt()));
        tr.a[(i, i)] = ct;
        tr.a[(i, j)] = cr;
        tr.a[(j, i)] = -cr;
        tr.a[(j, j)] = ct;
        Ok(tr)
    }

    /// Phase shifter on mode i: out_i = e^{i phi} in_i.
    pub fn phase_shifter(phi: f64, i: usize, n: usize) -> Result<Self> {
        if i >= n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: i + 1,
            });
        }
        let mut t = Self::identity(n);
        t.a[(i, i)] = Complex64::from_polar(1.0, phi);
        Ok(t)
    }

    /// Loss coupler of transmission eta on mode i of an `n`-mode register.
    /// The result acts on n + 1 modes; the fresh vacuum ancilla sits at
    /// index n.
    pub fn loss_channel(eta: f64, i: usize, n: usize) -> Result<Self> {
        if !eta.is_finite() || !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidLoss(eta));
        }
        Self::beam_splitter(eta, 1.0 - eta, i, n, n + 1)
    }

    /// Pads with identity action on fresh trailing modes up to `n` modes.
    pub fn embed(&self, n: usize) -> Result<Self> {
        let m = self.n_modes();
        if n < m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: n,
            });
        }
        if n == m {
            return Ok(self.clone());
        }
        let mut out = Self::identity(n);
        for r in 0..m {
            for c in 0..m {
                out.a[(r, c)] = self.a[(r, c)];
                out.b[(r, c)] = self.b[(r, c)];
            }
        }
        Ok(out)
    }

    /// Applies `self` first and `next` second. Mode counts may differ; the
    /// smaller transform is padded with identity on trailing modes.
    pub fn then(&self, next: &Self) -> Result<Self> {
        compose(self, next)
    }

    /// Largest violation of the physicality invariants
    /// A A^dag - B B^dag = I and A B^T = (A B^T)^T.
    pub fn invariant_residual(&self) -> f64 {
        let n = self.n_modes();
        let adag = self.a.t().mapv(|z| z.conj());
        let bdag = self.b.t().mapv(|z| z.conj());
        let comm = self.a.dot(&adag) - self.b.dot(&bdag);
        let sym = self.a.dot(&self.b.t());
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j {
                    Complex64::ONE
                } else {
                    Complex64::ZERO
                };
                worst = worst.max((comm[(i, j)] - target).norm());
                worst = worst.max((sym[(i, j)] - sym[(j, i)]).norm());
            }
        }
        worst
    }
}

fn check_mode_pair(i: usize, j: usize, n: usize) -> Result<()> {
    if i == j {
        return Err(Error::InvalidConfig(format!(
            "mode pair ({i}, {j}) must be distinct"
        )));
    }
    if i >= n || j >= n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: i.max(j) + 1,
        });
    }
    Ok(())
}

/// Composition that applies `first` and then `second`:
/// A = A2 A1 + B2 conj(B1), B = A2 B1 + B2 conj(A1).
pub fn compose(first: &BogoliubovTransform, second: &BogoliubovTransform) -> Result<BogoliubovTransform> {
    let n = first.n_modes().max(second.n_modes());
    let f = first.embed(n)?;
    let s = second.embed(n)?;
    let a = s.a.dot(&f.a) + s.b.dot(&f.b.mapv(|z| z.conj()));
    let b = s.a.dot(&f.b) + s.b.dot(&f.a.mapv(|z| z.conj()));
    Ok(BogoliubovTransform { a, b })
}

/// Full device transform at working phase `phi`.
///
/// Mode layout: 0 idler line, 1 squeezer-to-MZI line (and MZI output),
/// 2 coherent signal arm (carries the phase), 3 unused spare. With loss the
/// register widens to 8 and the coupler ancillas occupy fixed slots
/// 4 (idler line), 5 (MZI output line), 6 (signal arm), 7 (reference arm)
/// regardless of where the couplers sit in the chain.
pub fn build_interferometer_network(
    cfg: &InterferometerConfig,
    loss: &LossConfig,
    phi: f64,
) -> Result<BogoliubovTransform> {
    let bs = |n: usize| BogoliubovTransform::beam_splitter(cfg.bs_t(), cfg.bs_r(), 1, 2, n);
    let pa1 = |n: usize| {
        BogoliubovTransform::two_mode_squeezer(cfg.g1_gain(), cfg.g1_small(), cfg.theta1(), 0, 1, n)
    };
    let pa2 = |n: usize| {
        BogoliubovTransform::two_mode_squeezer(cfg.g2_gain(), cfg.g2_small(), cfg.theta2(), 0, 1, n)
    };
    if loss.is_lossless() {
        let n = 4;
        return pa1(n)?
            .then(&bs(n)?)?
            .then(&BogoliubovTransform::phase_shifter(phi, 2, n)?)?
            .then(&bs(n)?)?
            .then(&pa2(n)?);
    }
    let n = 8;
    let coupler = |eta: f64, line: usize, slot: usize| {
        BogoliubovTransform::beam_splitter(eta, 1.0 - eta, line, slot, n)
    };
    pa1(n)?
        .then(&bs(n)?)?
        .then(&coupler(loss.eta_d(), 1, 7)?)?
        .then(&BogoliubovTransform::phase_shifter(phi, 2, n)?)?
        .then(&coupler(loss.eta_c(), 2, 6)?)?
        .then(&bs(n)?)?
        .then(&coupler(loss.eta_a(), 0, 4)?)?
        .then(&coupler(loss.eta_b(), 1, 5)?)?
        .then(&pa2(n)?)
}

/// Front end of the device only (first squeezer plus input splitter), on the
/// 4-mode lossless register. Modes 1 and 2 are the two MZI arms, so their
/// photon content right after this transform is the phase-probing resource.
pub fn probe_network(cfg: &InterferometerConfig) -> Result<BogoliubovTransform> {
    let n = 4;
    BogoliubovTransform::two_mode_squeezer(cfg.g1_gain(), cfg.g1_small(), cfg.theta1(), 0, 1, n)?
        .then(&BogoliubovTransform::beam_splitter(
            cfg.bs_t(),
            cfg.bs_r(),
            1,
            2,
            n,
        )?)
}

/// Reads the two readout rows of a device transform back as a coefficient
/// set. Accepts the 4-mode (lossless) and 8-mode (lossy) registers produced
/// by `build_interferometer_network`.
pub fn coefficient_set_from(net: &BogoliubovTransform, phi: f64) -> Result<CoefficientSet> {
    let n = net.n_modes();
    if n != 4 && n != 8 {
        return Err(Error::DimensionMismatch {
            expected: 8,
            actual: n,
        });
    }
    let zero = Complex64::ZERO;
    let pick = |grid: &Array2<Complex64>, row: usize, col: usize| {
        if col < n {
            grid[(row, col)]
        } else {
            zero
        }
    };
    let t = [
        pick(&net.a, 0, 0),
        pick(&net.b, 0, 1),
        pick(&net.b, 0, 2),
        pick(&net.a, 0, 4),
        pick(&net.b, 0, 5),
        pick(&net.b, 0, 6),
        pick(&net.b, 0, 7),
    ];
    let m = [
        pick(&net.b, 1, 0).conj(),
        pick(&net.a, 1, 1).conj(),
        pick(&net.a, 1, 2).conj(),
        pick(&net.b, 1, 4).conj(),
        pick(&net.a, 1, 5).conj(),
        pick(&net.a, 1, 6).conj(),
        pick(&net.a, 1, 7).conj(),
    ];
    Ok(CoefficientSet::new(t, m, phi))
}

/// Coherent amplitudes fed into each mode; every unlisted mode is vacuum.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSpec {
    amplitudes: Vec<Complex64>,
}

impl InputSpec {
    pub fn vacuum(n: usize) -> Self {
        Self {
            amplitudes: vec![Complex64::ZERO; n],
        }
    }

    pub fn with_coherent(mut self, mode: usize, alpha: Complex64) -> Result<Self> {
        if mode >= self.amplitudes.len() {
            return Err(Error::DimensionMismatch {
                expected: self.amplitudes.len(),
                actual: mode + 1,
            });
        }
        self.amplitudes[mode] = alpha;
        Ok(self)
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn n_modes(&self) -> usize {
        self.amplitudes.len()
    }
}

/// Device input: vacuum everywhere except the real coherent amplitude
/// sqrt(n_c) on the signal mode.
pub fn signal_input(cfg: &InterferometerConfig, n_modes: usize) -> Result<InputSpec> {
    InputSpec::vacuum(n_modes).with_coherent(2, Complex64::from(cfg.alpha()))
}

/// First and second moments of the output modes: means <a_i>, photon matrix
/// <a_i^dag a_j> and anomalous matrix <a_i a_j>.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    mean: Array1<Complex64>,
    photon: Array2<Complex64>,
    anomalous: Array2<Complex64>,
}

impl MomentSet {
    pub fn n_modes(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &Array1<Complex64> {
        &self.mean
    }

    pub fn photon_matrix(&self) -> &Array2<Complex64> {
        &self.photon
    }

    pub fn anomalous_matrix(&self) -> &Array2<Complex64> {
        &self.anomalous
    }

    /// Mean photon number of one mode.
    pub fn mean_photon(&self, mode: usize) -> f64 {
        self.photon[(mode, mode)].re
    }

    /// Mean photon number summed over all modes.
    pub fn total_photon(&self) -> f64 {
        (0..self.n_modes()).map(|i| self.mean_photon(i)).sum()
    }

    /// Centered photon moment <da_i^dag da_j>.
    pub fn photon_fluctuation(&self, i: usize, j: usize) -> Complex64 {
        self.photon[(i, j)] - self.mean[i].conj() * self.mean[j]
    }

    /// Centered anomalous moment <da_i da_j>.
    pub fn anomalous_fluctuation(&self, i: usize, j: usize) -> Complex64 {
        self.anomalous[(i, j)] - self.mean[i] * self.mean[j]
    }
}

/// Propagates a coherent-plus-vacuum input through a transform. The input
/// covariances are those of vacuum, so the output fluctuation matrices are
/// conj(B) B^T and A B^T; the coherent displacement adds mean-field terms.
pub fn propagate_moments(t: &BogoliubovTransform, input: &InputSpec) -> Result<MomentSet> {
    let n = t.n_modes();
    if input.n_modes() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: input.n_modes(),
        });
    }
    let alpha = Array1::from(input.amplitudes().to_vec());
    let mean = t.a.dot(&alpha) + t.b.dot(&alpha.mapv(|z| z.conj()));
    let n_fluct = t.b.mapv(|z| z.conj()).dot(&t.b.t());
    let s_fluct = t.a.dot(&t.b.t());
    let mut photon = n_fluct;
    let mut anomalous = s_fluct;
    for i in 0..n {
        for j in 0..n {
            photon[(i, j)] += mean[i].conj() * mean[j];
            anomalous[(i, j)] += mean[i] * mean[j];
        }
    }
    Ok(MomentSet {
        mean,
        photon,
        anomalous,
    })
}

/// Measured quantity on a propagated state.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservableSpec {
    /// Quadrature Y = i (a^dag - a) of one mode.
    QuadratureY { mode: usize },
    /// Total photon number summed over a set of distinct modes.
    PhotonSum { modes: Vec<usize> },
}

/// Mean and variance of an observable. The photon-sum variance applies the
/// Gaussian (Wick) factorization to the quartic moments, which is exact for
/// the states this engine produces.
pub fn observable_stats(m: &MomentSet, obs: &ObservableSpec) -> Result<(f64, f64)> {
    let n = m.n_modes();
    match obs {
        ObservableSpec::QuadratureY { mode } => {
            let i = *mode;
            if i >= n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: i + 1,
                });
            }
            let mu = m.mean()[i];
            let nf = m.photon_fluctuation(i, i);
            let sf = m.anomalous_fluctuation(i, i);
            let mean = 2.0 * mu.im;
            let var = 1.0 + 2.0 * nf.re - 2.0 * sf.re;
            Ok((mean, var))
        }
        ObservableSpec::PhotonSum { modes } => {
            for (k, &i) in modes.iter().enumerate() {
                if i >= n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        actual: i + 1,
                    });
                }
                if modes[..k].contains(&i) {
                    return Err(Error::InvalidConfig(format!(
                        "photon sum lists mode {i} twice"
                    )));
                }
            }
            let mut mean = 0.0;
            let mut var = 0.0;
            for &i in modes {
                mean += m.mean_photon(i);
                let mu = m.mean()[i];
                var += mu.norm_sqr() + m.photon_fluctuation(i, i).re;
            }
            for &i in modes {
                for &j in modes {
                    let mui = m.mean()[i];
                    let muj = m.mean()[j];
                    let nf = m.photon_fluctuation(i, j);
                    let sf = m.anomalous_fluctuation(i, j);
                    var += 2.0 * (mui.conj() * muj.conj() * sf).re;
                    var += 2.0 * (mui * muj.conj() * nf).re;
                    var += sf.norm_sqr() + nf.norm_sqr();
                }
            }
            Ok((mean, var))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{coefficients_lossless, coefficients_lossy};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_setup(
        rng: &mut ChaCha8Rng,
    ) -> (InterferometerConfig, LossConfig, f64) {
        let t: f64 = rng.random_range(0.05..0.95);
        let cfg = InterferometerConfig::from_gains(
            rng.random_range(0.0..30.0),
            1.0 + rng.random_range(0.0..2.5),
            1.0 + rng.random_range(0.0..4.0),
            rng.random_range(0.0..(2.0 * PI)),
            rng.random_range(0.0..(2.0 * PI)),
            t,
            1.0 - t,
        )
        .unwrap();
        let loss = LossConfig::new(
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..1.0),
        )
        .unwrap();
        (cfg, loss, rng.random_range(0.0..(2.0 * PI)))
    }

    #[test]
    fn squeezer_moments_match_hand_values() {
        let g_big = 5.0_f64.sqrt();
        let t =
            BogoliubovTransform::two_mode_squeezer(g_big, 2.0, 0.9, 0, 1, 2).unwrap();
        let m = propagate_moments(&t, &InputSpec::vacuum(2)).unwrap();
        assert!((m.mean_photon(0) - 4.0).abs() < 1e-12);
        assert!((m.mean_photon(1) - 4.0).abs() < 1e-12);
        let cross = m.anomalous_matrix()[(0, 1)];
        let expect = Complex64::from_polar(2.0 * g_big, 0.9);
        assert!((cross - expect).norm() < 1e-12);
    }

    #[test]
    fn loss_couplers_multiply_transmissions() {
        let first = BogoliubovTransform::loss_channel(0.7, 0, 1).unwrap();
        let second = BogoliubovTransform::loss_channel(0.5, 0, 2).unwrap();
        let both = first.then(&second).unwrap();
        let input = InputSpec::vacuum(3)
            .with_coherent(0, Complex64::from(2.0))
            .unwrap();
        let m = propagate_moments(&both, &input).unwrap();
        assert!((m.mean_photon(0) - 4.0 * 0.7 * 0.5).abs() < 1e-12);
        // The lost photons all end up in the two ancillas.
        assert!((m.total_photon() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn coherent_state_through_single_loss() {
        let t = BogoliubovTransform::loss_channel(0.7, 0, 1).unwrap();
        let input = InputSpec::vacuum(2)
            .with_coherent(0, Complex64::from(2.0))
            .unwrap();
        let m = propagate_moments(&t, &input).unwrap();
        assert!((m.mean_photon(0) - 2.8).abs() < 1e-12);
        // A transmitted coherent state stays Poissonian.
        let (mean, var) =
            observable_stats(&m, &ObservableSpec::PhotonSum { modes: vec![0] }).unwrap();
        assert!((mean - 2.8).abs() < 1e-12);
        assert!((var - 2.8).abs() < 1e-12);
    }

    #[test]
    fn composition_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (cfg, loss, phi) = random_setup(&mut rng);
            let t1 = BogoliubovTransform::two_mode_squeezer(
                cfg.g1_gain(),
                cfg.g1_small(),
                cfg.theta1(),
                0,
                1,
                3,
            )
            .unwrap();
            let t2 = BogoliubovTransform::beam_splitter(cfg.bs_t(), cfg.bs_r(), 1, 2, 3).unwrap();
            let t3 = BogoliubovTransform::loss_channel(loss.eta_c(), 2, 3).unwrap();
            let p0 = BogoliubovTransform::phase_shifter(phi, 2, 3).unwrap();
            let left = t1.then(&t2).unwrap().then(&t3).unwrap().then(&p0).unwrap();
            let right = t1
                .then(&t2.then(&t3).unwrap().then(&p0).unwrap())
                .unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    assert!((left.a_block()[(i, j)] - right.a_block()[(i, j)]).norm() < 1e-12);
                    assert!((left.b_block()[(i, j)] - right.b_block()[(i, j)]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn passive_elements_conserve_photons() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let t: f64 = rng.random_range(0.0..1.0);
            let bs = BogoliubovTransform::beam_splitter(t, 1.0 - t, 0, 1, 2).unwrap();
            let input = InputSpec::vacuum(2)
                .with_coherent(0, Complex64::new(rng.random_range(-2.0..2.0), 0.4))
                .unwrap()
                .with_coherent(1, Complex64::new(0.3, rng.random_range(-2.0..2.0)))
                .unwrap();
            let before: f64 = input.amplitudes().iter().map(|a| a.norm_sqr()).sum();
            let m = propagate_moments(&bs, &input).unwrap();
            assert!((m.total_photon() - before).abs() < 1e-12);
        }
    }

    #[test]
    fn network_rows_match_closed_form_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let (cfg, loss, phi) = random_setup(&mut rng);
            for use_loss in [false, true] {
                let l = if use_loss { loss } else { LossConfig::lossless() };
                let net = build_interferometer_network(&cfg, &l, phi).unwrap();
                assert!(net.invariant_residual() < 1e-11);
                let rows = coefficient_set_from(&net, phi).unwrap();
                let closed = if use_loss {
                    coefficients_lossy(&cfg, &l, phi)
                } else {
                    coefficients_lossless(&cfg, phi)
                };
                for k in 0..7 {
                    assert!(
                        (rows.t()[k] - closed.t()[k]).norm() < 1e-12,
                        "t[{k}] mismatch"
                    );
                    assert!(
                        (rows.m()[k] - closed.m()[k]).norm() < 1e-12,
                        "m[{k}] mismatch"
                    );
                }
            }
        }
    }

    #[test]
    fn probe_network_carries_all_input_photons_into_the_arms() {
        let cfg = InterferometerConfig::standard();
        let net = probe_network(&cfg).unwrap();
        let input = signal_input(&cfg, net.n_modes()).unwrap();
        let m = propagate_moments(&net, &input).unwrap();
        let arms = m.mean_photon(1) + m.mean_photon(2);
        let expect = cfg.n_c() + cfg.g1_small() * cfg.g1_small();
        assert!((arms - expect).abs() < 1e-9 * expect);
    }

    #[test]
    fn quadrature_of_vacuum_and_of_a_displaced_mode() {
        let id = BogoliubovTransform::identity(1);
        let vac = propagate_moments(&id, &InputSpec::vacuum(1)).unwrap();
        let (mean, var) =
            observable_stats(&vac, &ObservableSpec::QuadratureY { mode: 0 }).unwrap();
        assert!(mean.abs() < 1e-15);
        assert!((var - 1.0).abs() < 1e-15);

        let disp = propagate_moments(
            &id,
            &InputSpec::vacuum(1)
                .with_coherent(0, Complex64::new(0.0, 1.5))
                .unwrap(),
        )
        .unwrap();
        let (mean, var) =
            observable_stats(&disp, &ObservableSpec::QuadratureY { mode: 0 }).unwrap();
        assert!((mean - 3.0).abs() < 1e-14);
        assert!((var - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dimension_errors_are_reported() {
        let t = BogoliubovTransform::identity(2);
        assert!(propagate_moments(&t, &InputSpec::vacuum(3)).is_err());
        assert!(BogoliubovTransform::beam_splitter(0.5, 0.5, 0, 0, 2).is_err());
        assert!(BogoliubovTransform::beam_splitter(0.6, 0.6, 0, 1, 2).is_err());
        assert!(BogoliubovTransform::two_mode_squeezer(0.8, 0.0, 0.0, 0, 1, 2).is_err());
        assert!(BogoliubovTransform::loss_channel(1.4, 0, 1).is_err());
        let m = propagate_moments(&BogoliubovTransform::identity(2), &InputSpec::vacuum(2))
            .unwrap();
        assert!(observable_stats(&m, &ObservableSpec::QuadratureY { mode: 5 }).is_err());
        assert!(
            observable_stats(&m, &ObservableSpec::PhotonSum { modes: vec![0, 0] }).is_err()
        );
    }
}
