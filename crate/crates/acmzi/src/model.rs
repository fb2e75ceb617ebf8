use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerance on the hyperbolic gain constraint G^2 - g^2 = 1.
const GAIN_TOL: f64 = 1e-12;
/// Tolerance on the splitter constraint T + R = 1.
const SPLIT_TOL: f64 = 1e-12;

/// Static device parameters of the actively correlated Mach-Zehnder
/// interferometer: a two-mode squeezer (PA1) feeding one MZI port, a coherent
/// signal on the other, and a second squeezer (PA2) recombining the MZI
/// output with the retained idler.
///
/// Invariants enforced at construction:
/// - G1^2 - g1^2 = 1 and G2^2 - g2^2 = 1 (within 1e-12),
/// - T + R = 1 with both in [0, 1],
/// - n_c >= 0 and alpha = sqrt(n_c) (the coherent amplitude is real).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferometerConfig {
    n_c: f64,
    alpha: f64,
    g1_gain: f64,
    g1_small: f64,
    g2_gain: f64,
    g2_small: f64,
    theta1: f64,
    theta2: f64,
    bs_t: f64,
    bs_r: f64,
}

impl InterferometerConfig {
    /// Builds a configuration from every stored field, validating all
    /// invariants. The coherent amplitude is derived from `n_c`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        n_c: f64,
        g1_gain: f64,
        g1_small: f64,
        g2_gain: f64,
        g2_small: f64,
        theta1: f64,
        theta2: f64,
        bs_t: f64,
        bs_r: f64,
    ) -> Result<Self> {
        if !n_c.is_finite() || n_c < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "mean photon number n_c = {n_c} must be finite and non-negative"
            )));
        }
        check_gain_pair(g1_gain, g1_small)?;
        check_gain_pair(g2_gain, g2_small)?;
        if !theta1.is_finite() || !theta2.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "pump phases must be finite, got theta1 = {theta1}, theta2 = {theta2}"
            )));
        }
        check_split(bs_t, bs_r)?;
        Ok(Self {
            n_c,
            alpha: n_c.sqrt(),
            g1_gain,
            g1_small,
            g2_gain,
            g2_small,
            theta1,
            theta2,
            bs_t,
            bs_r,
        })
    }

    /// Builds a configuration from the two large gains; the small gains are
    /// derived from G^2 - g^2 = 1.
    pub fn from_gains(
        n_c: f64,
        g1_gain: f64,
        g2_gain: f64,
        theta1: f64,
        theta2: f64,
        bs_t: f64,
        bs_r: f64,
    ) -> Result<Self> {
        let g1_small = small_gain(g1_gain)?;
        let g2_small = small_gain(g2_gain)?;
        Self::from_parts(
            n_c, g1_gain, g1_small, g2_gain, g2_small, theta1, theta2, bs_t, bs_r,
        )
    }

    /// Same as `from_gains` with the squared gains G1^2 and G2^2 as inputs.
    pub fn from_gains_squared(
        n_c: f64,
        g1_sq: f64,
        g2_sq: f64,
        theta1: f64,
        theta2: f64,
        bs_t: f64,
        bs_r: f64,
    ) -> Result<Self> {
        if !g1_sq.is_finite() || g1_sq < 1.0 || !g2_sq.is_finite() || g2_sq < 1.0 {
            return Err(Error::InvalidGain(g1_sq.min(g2_sq)));
        }
        Self::from_gains(
            n_c,
            g1_sq.sqrt(),
            g2_sq.sqrt(),
            theta1,
            theta2,
            bs_t,
            bs_r,
        )
    }

    /// Balanced device (G2 = G1) with the pump phases and the 50/50 splitter
    /// used by every detection formula: theta1 = 0, theta2 = pi, T = R = 1/2.
    pub fn balanced(n_c: f64, g1_gain: f64) -> Result<Self> {
        Self::from_gains(n_c, g1_gain, g1_gain, 0.0, std::f64::consts::PI, 0.5, 0.5)
    }

    /// Reference operating point: n_c = 1000, G1^2 = 5, balanced, 50/50
    /// splitter, theta1 = 0 and theta2 = pi.
    pub fn standard() -> Self {
        Self::balanced(1000.0, 5.0_f64.sqrt()).expect("reference parameters are valid")
    }

    /// Returns a copy with a different recombination gain G2 (g2 rederived).
    pub fn with_g2_gain(&self, g2_gain: f64) -> Result<Self> {
        let g2_small = small_gain(g2_gain)?;
        Self::from_parts(
            self.n_c,
            self.g1_gain,
            self.g1_small,
            g2_gain,
            g2_small,
            self.theta1,
            self.theta2,
            self.bs_t,
            self.bs_r,
        )
    }

    /// Returns a copy with a different splitter (T, R).
    pub fn with_split(&self, bs_t: f64, bs_r: f64) -> Result<Self> {
        Self::from_parts(
            self.n_c,
            self.g1_gain,
            self.g1_small,
            self.g2_gain,
            self.g2_small,
            self.theta1,
            self.theta2,
            bs_t,
            bs_r,
        )
    }

    pub fn n_c(&self) -> f64 {
        self.n_c
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn g1_gain(&self) -> f64 {
        self.g1_gain
    }

    pub fn g1_small(&self) -> f64 {
        self.g1_small
    }

    pub fn g2_gain(&self) -> f64 {
        self.g2_gain
    }

    pub fn g2_small(&self) -> f64 {
        self.g2_small
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    pub fn theta2(&self) -> f64 {
        self.theta2
    }

    pub fn bs_t(&self) -> f64 {
        self.bs_t
    }

    pub fn bs_r(&self) -> f64 {
        self.bs_r
    }

    /// Recombination-to-splitting gain ratio G2/G1.
    pub fn gain_ratio(&self) -> f64 {
        self.g2_gain / self.g1_gain
    }
}

fn check_gain_pair(g_big: f64, g_small: f64) -> Result<()> {
    if !g_big.is_finite() || g_big < 1.0 {
        return Err(Error::InvalidGain(g_big));
    }
    if !g_small.is_finite() || g_small < 0.0 {
        return Err(Error::InvalidGain(g_small));
    }
    let residual = g_big * g_big - g_small * g_small - 1.0;
    if residual.abs() > GAIN_TOL * (1.0 + g_big * g_big) {
        return Err(Error::InvalidGain(g_big));
    }
    Ok(())
}

fn small_gain(g_big: f64) -> Result<f64> {
    if !g_big.is_finite() || g_big < 1.0 {
        return Err(Error::InvalidGain(g_big));
    }
    Ok((g_big * g_big - 1.0).sqrt())
}

fn check_split(t: f64, r: f64) -> Result<()> {
    let ok = t.is_finite()
        && r.is_finite()
        && (0.0..=1.0).contains(&t)
        && (0.0..=1.0).contains(&r)
        && (t + r - 1.0).abs() <= SPLIT_TOL;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidSplit { t, r })
    }
}

/// Transmission rates of the four fictitious loss couplers: eta_a and eta_b
/// act outside the MZI (idler line and MZI output line, both just before the
/// recombination squeezer), eta_c and eta_d act on the MZI arms (eta_c on the
/// phase arm after the phase shift, eta_d on the other arm).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    eta_a: f64,
    eta_b: f64,
    eta_c: f64,
    eta_d: f64,
}

impl LossConfig {
    pub fn new(eta_a: f64, eta_b: f64, eta_c: f64, eta_d: f64) -> Result<Self> {
        for eta in [eta_a, eta_b, eta_c, eta_d] {
            if !eta.is_finite() || !(0.0..=1.0).contains(&eta) {
                return Err(Error::InvalidLoss(eta));
            }
        }
        Ok(Self {
            eta_a,
            eta_b,
            eta_c,
            eta_d,
        })
    }

    /// All four transmissions equal to one.
    pub fn lossless() -> Self {
        Self {
            eta_a: 1.0,
            eta_b: 1.0,
            eta_c: 1.0,
            eta_d: 1.0,
        }
    }

    /// Loss on the external lines only (arms stay lossless).
    pub fn external(eta_a: f64, eta_b: f64) -> Result<Self> {
        Self::new(eta_a, eta_b, 1.0, 1.0)
    }

    /// Loss on the MZI arms only (external lines stay lossless).
    pub fn internal(eta_c: f64, eta_d: f64) -> Result<Self> {
        Self::new(1.0, 1.0, eta_c, eta_d)
    }

    pub fn eta_a(&self) -> f64 {
        self.eta_a
    }

    pub fn eta_b(&self) -> f64 {
        self.eta_b
    }

    pub fn eta_c(&self) -> f64 {
        self.eta_c
    }

    pub fn eta_d(&self) -> f64 {
        self.eta_d
    }

    pub fn is_lossless(&self) -> bool {
        self.eta_a == 1.0 && self.eta_b == 1.0 && self.eta_c == 1.0 && self.eta_d == 1.0
    }
}

/// Input-output coefficients of the two readout ports at a fixed phase.
///
/// Port 1 (the amplified idler line) reads
///   out_1 = t[0] a0 + t[1] b0^dag + t[2] c0^dag
///         + t[3] v_a + t[4] v_b^dag + t[5] v_c^dag + t[6] v_d^dag,
/// and the dagger of port 2 (the amplified MZI output) reads
///   out_2^dag = m[0] a0 + m[1] b0^dag + m[2] c0^dag
///             + m[3] v_a + m[4] v_b^dag + m[5] v_c^dag + m[6] v_d^dag,
/// where a0 is the idler input, b0 the MZI-side squeezer input, c0 the
/// coherent signal input and v_a..v_d the vacuum ancillas of the four loss
/// couplers, in that order. Commutation survival of both ports pins the
/// signed sums of squared magnitudes to exactly one.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    t: [Complex64; 7],
    m: [Complex64; 7],
    phi: f64,
}

impl CoefficientSet {
    pub fn new(t: [Complex64; 7], m: [Complex64; 7], phi: f64) -> Self {
        Self { t, m, phi }
    }

    pub fn t(&self) -> &[Complex64; 7] {
        &self.t
    }

    pub fn m(&self) -> &[Complex64; 7] {
        &self.m
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// Signed magnitude sum that equals one when port 1 keeps bosonic
    /// commutation: |t1|^2 - |t2|^2 - |t3|^2 + |t4|^2 - |t5|^2 - |t6|^2
    /// - |t7|^2.
    pub fn commutator_sum_a(&self) -> f64 {
        let n = |k: usize| self.t[k].norm_sqr();
        n(0) - n(1) - n(2) + n(3) - n(4) - n(5) - n(6)
    }

    /// Signed magnitude sum that equals one when port 2 keeps bosonic
    /// commutation: -|m1|^2 + |m2|^2 + |m3|^2 - |m4|^2 + |m5|^2 + |m6|^2
    /// + |m7|^2.
    pub fn commutator_sum_b(&self) -> f64 {
        let n = |k: usize| self.m[k].norm_sqr();
        -n(0) + n(1) + n(2) - n(3) + n(4) + n(5) + n(6)
    }

    /// Joint-port product t_i t_j^* + m_i m_j^* (zero-based indices), the
    /// building block of the photon-sum variance.
    pub fn h_product(&self, i: usize, j: usize) -> Complex64 {
        self.t[i] * self.t[j].conj() + self.m[i] * self.m[j].conj()
    }
}

/// Closed-form readout coefficients of the lossless device. Entries 4..7
/// (the ancilla couplings) are zero.
pub fn coefficients_lossless(cfg: &InterferometerConfig, phi: f64) -> CoefficientSet {
    coefficients_with_loss(cfg, &LossConfig::lossless(), phi, true)
}

/// Closed-form readout coefficients with the four loss couplers in place.
/// Reduces exactly to `coefficients_lossless` when every transmission is one.
pub fn coefficients_lossy(
    cfg: &InterferometerConfig,
    loss: &LossConfig,
    phi: f64,
) -> CoefficientSet {
    coefficients_with_loss(cfg, loss, phi, false)
}

fn coefficients_with_loss(
    cfg: &InterferometerConfig,
    loss: &LossConfig,
    phi: f64,
    zero_ancillas: bool,
) -> CoefficientSet {
    let (big1, sm1) = (cfg.g1_gain(), cfg.g1_small());
    let (big2, sm2) = (cfg.g2_gain(), cfg.g2_small());
    let (t, r) = (cfg.bs_t(), cfg.bs_r());
    let (ea, eb, ec, ed) = (loss.eta_a(), loss.eta_b(), loss.eta_c(), loss.eta_d());
    let e1 = Complex64::from_polar(1.0, cfg.theta1());
    let e2 = Complex64::from_polar(1.0, cfg.theta2());
    let em_phi = Complex64::from_polar(1.0, -phi);

    // Arm propagation factors, conjugate-phase versions: the "through"
    // amplitude of the inner MZI and the coherent-signal route.
    let us = t * ed.sqrt() - r * ec.sqrt() * em_phi;
    let ws = (t * r).sqrt() * (ed.sqrt() + ec.sqrt() * em_phi);

    let ra = ea.sqrt();
    let rb = eb.sqrt();

    let mut tc = [
        big1 * big2 * ra + sm1 * sm2 * e2 * e1.conj() * rb * us,
        big2 * sm1 * e1 * ra + big1 * sm2 * e2 * rb * us,
        sm2 * e2 * rb * ws,
        Complex64::from(big2 * (1.0 - ea).sqrt()),
        sm2 * e2 * (1.0 - eb).sqrt(),
        sm2 * e2 * (r * eb * (1.0 - ec)).sqrt(),
        sm2 * e2 * (t * eb * (1.0 - ed)).sqrt(),
    ];
    let mut mc = [
        big1 * sm2 * e2.conj() * ra + big2 * sm1 * e1.conj() * rb * us,
        sm1 * sm2 * e2.conj() * e1 * ra + big1 * big2 * rb * us,
        big2 * rb * ws,
        sm2 * e2.conj() * (1.0 - ea).sqrt(),
        Complex64::from(big2 * (1.0 - eb).sqrt()),
        Complex64::from(big2 * (r * eb * (1.0 - ec)).sqrt()),
        Complex64::from(big2 * (t * eb * (1.0 - ed)).sqrt()),
    ];
    if zero_ancillas {
        for k in 3..7 {
            tc[k] = Complex64::ZERO;
            mc[k] = Complex64::ZERO;
        }
    }
    CoefficientSet::new(tc, mc, phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn fig_config() -> InterferometerConfig {
        InterferometerConfig::from_gains_squared(1000.0, 5.0, 20.0, 0.0, PI, 0.5, 0.5).unwrap()
    }

    #[test]
    fn lossless_coefficients_at_reference_point() {
        let cs = coefficients_lossless(&fig_config(), 0.0);
        // T - R e^{-i phi} vanishes for a balanced splitter at phi = 0, so
        // the first entry is the bare product of large gains.
        assert!((cs.t()[0] - Complex64::from(10.0)).norm() < 1e-12);
        assert!((cs.t()[1] - Complex64::from(2.0 * 20.0_f64.sqrt())).norm() < 1e-12);
        assert!((cs.t()[2] - Complex64::from(-19.0_f64.sqrt())).norm() < 1e-12);
        for k in 3..7 {
            assert_eq!(cs.t()[k], Complex64::ZERO);
            assert_eq!(cs.m()[k], Complex64::ZERO);
        }
        // 100 - 80 - 19 = 1.
        assert!((cs.commutator_sum_a() - 1.0).abs() < 1e-10);
        assert!((cs.commutator_sum_b() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn commutator_sums_hold_on_random_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let t: f64 = rng.random_range(0.0..1.0);
            let cfg = InterferometerConfig::from_gains(
                rng.random_range(0.0..50.0),
                1.0 + rng.random_range(0.0..3.0),
                1.0 + rng.random_range(0.0..5.0),
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
            let phi = rng.random_range(0.0..(2.0 * PI));
            let cs = coefficients_lossy(&cfg, &loss, phi);
            assert!((cs.commutator_sum_a() - 1.0).abs() < 1e-10);
            assert!((cs.commutator_sum_b() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn lossy_reduces_to_lossless_at_unit_transmission() {
        let cfg = fig_config();
        for phi in [0.0, 0.7, PI, 4.4] {
            let a = coefficients_lossless(&cfg, phi);
            let b = coefficients_lossy(&cfg, &LossConfig::lossless(), phi);
            for k in 0..7 {
                assert!((a.t()[k] - b.t()[k]).norm() < 1e-14);
                assert!((a.m()[k] - b.m()[k]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn dark_output_line_blocks_the_signal() {
        let cfg = fig_config();
        let loss = LossConfig::new(1.0, 0.0, 1.0, 1.0).unwrap();
        let cs = coefficients_lossy(&cfg, &loss, 1.3);
        assert_eq!(cs.t()[2], Complex64::ZERO);
        assert_eq!(cs.m()[2], Complex64::ZERO);
    }

    #[test]
    fn coefficients_are_periodic_in_phase() {
        let cfg = fig_config();
        let loss = LossConfig::new(0.9, 0.8, 0.7, 0.6).unwrap();
        let a = coefficients_lossy(&cfg, &loss, 1.1);
        let b = coefficients_lossy(&cfg, &loss, 1.1 + 2.0 * PI);
        for k in 0..7 {
            assert!((a.t()[k] - b.t()[k]).norm() < 1e-12);
            assert!((a.m()[k] - b.m()[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn signal_routes_cancel_at_pi_for_equal_arm_loss() {
        let cfg = fig_config();
        for eta in [1.0, 0.6] {
            let loss = LossConfig::new(1.0, 1.0, eta, eta).unwrap();
            let cs = coefficients_lossy(&cfg, &loss, PI);
            assert!(cs.t()[2].norm() < 1e-12);
            assert!(cs.m()[2].norm() < 1e-12);
        }
    }

    #[test]
    fn constructors_reject_invalid_parameters() {
        assert!(InterferometerConfig::from_gains(-1.0, 2.0, 2.0, 0.0, PI, 0.5, 0.5).is_err());
        assert!(InterferometerConfig::from_gains(10.0, 0.5, 2.0, 0.0, PI, 0.5, 0.5).is_err());
        assert!(InterferometerConfig::from_gains(10.0, 2.0, 2.0, 0.0, PI, 0.7, 0.7).is_err());
        assert!(
            InterferometerConfig::from_parts(10.0, 2.0, 1.0, 2.0, 3.0_f64.sqrt(), 0.0, PI, 0.5, 0.5)
                .is_err()
        );
        assert!(LossConfig::new(1.2, 1.0, 1.0, 1.0).is_err());
        assert!(LossConfig::new(0.5, -0.1, 1.0, 1.0).is_err());
        assert!(InterferometerConfig::standard().with_g2_gain(0.9).is_err());
    }
}
