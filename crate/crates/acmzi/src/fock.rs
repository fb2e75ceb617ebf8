use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::InterferometerConfig;

/// Probability mass allowed to leak out of the truncated basis.
const LEAKAGE_TOL: f64 = 1e-8;
/// Per-factor Taylor series cutoff on the relative term size.
const TERM_TOL: f64 = 1e-15;

/// Dense three-mode state in the number basis, each mode truncated at
/// `cutoff` photons. Mode order: 0 the idler line, 1 the squeezer-to-MZI
/// line, 2 the coherent signal line. Amplitudes are stored flat with index
/// (n0 * dim + n1) * dim + n2, dim = cutoff + 1.
///
/// This representation makes no Gaussian assumption, so expectation values
/// computed here independently check the moment engine and every closed
/// form derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    dim: usize,
    amps: Vec<Complex64>,
}

impl DenseState {
    pub fn vacuum(cutoff: usize) -> Self {
        let dim = cutoff + 1;
        let mut amps = vec![Complex64::ZERO; dim * dim * dim];
        amps[0] = Complex64::ONE;
        Self { dim, amps }
    }

    /// Basis state |n0, n1, n2>.
    pub fn number_state(cutoff: usize, n0: usize, n1: usize, n2: usize) -> Result<Self> {
        let dim = cutoff + 1;
        if n0 > cutoff || n1 > cutoff || n2 > cutoff {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: n0.max(n1).max(n2) + 1,
            });
        }
        let mut amps = vec![Complex64::ZERO; dim * dim * dim];
        amps[(n0 * dim + n1) * dim + n2] = Complex64::ONE;
        Ok(Self { dim, amps })
    }

    /// Wraps raw amplitudes; the length must be (cutoff + 1)^3.
    pub fn from_amplitudes(cutoff: usize, amps: Vec<Complex64>) -> Result<Self> {
        let dim = cutoff + 1;
        if amps.len() != dim * dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim * dim,
                actual: amps.len(),
            });
        }
        Ok(Self { dim, amps })
    }

    pub fn cutoff(&self) -> usize {
        self.dim - 1
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn amplitude(&self, n0: usize, n1: usize, n2: usize) -> Complex64 {
        self.amps[(n0 * self.dim + n1) * self.dim + n2]
    }

    fn idx(&self, n0: usize, n1: usize, n2: usize) -> usize {
        (n0 * self.dim + n1) * self.dim + n2
    }

    /// Occupation of the outermost truncation layer; growth here signals
    /// that the basis is too small for the requested evolution.
    pub fn top_layer_mass(&self) -> f64 {
        let top = self.dim - 1;
        let mut mass = 0.0;
        for n0 in 0..self.dim {
            for n1 in 0..self.dim {
                for n2 in 0..self.dim {
                    if n0 == top || n1 == top || n2 == top {
                        mass += self.amps[self.idx(n0, n1, n2)].norm_sqr();
                    }
                }
            }
        }
        mass
    }

    /// Photon-number occupation probabilities are diagonal here, so the sum
    /// over any mode subset has exact mean and variance. Expectations are
    /// taken against the normalized state.
    pub fn photon_sum_stats(&self, modes: &[usize]) -> Result<(f64, f64)> {
        for &m in modes {
            if m > 2 {
                return Err(Error::DimensionMismatch {
                    expected: 3,
                    actual: m + 1,
                });
            }
        }
        let mut norm = 0.0;
        let mut mean = 0.0;
        let mut second = 0.0;
        for n0 in 0..self.dim {
            for n1 in 0..self.dim {
                for n2 in 0..self.dim {
                    let p = self.amps[self.idx(n0, n1, n2)].norm_sqr();
                    if p == 0.0 {
                        continue;
                    }
                    norm += p;
                    let ns = [n0, n1, n2];
                    let total: usize = modes.iter().map(|&m| ns[m]).sum();
                    mean += p * total as f64;
                    second += p * (total * total) as f64;
                }
            }
        }
        mean /= norm;
        second /= norm;
        Ok((mean, second - mean * mean))
    }

    /// Expectation of the annihilation operator of one mode.
    pub fn mode_mean(&self, mode: usize) -> Result<Complex64> {
        self.contract(mode, 1)
    }

    /// Mean and variance of the quadrature Y = i (a^dag - a) of one mode.
    pub fn quadrature_y_stats(&self, mode: usize) -> Result<(f64, f64)> {
        let mu = self.contract(mode, 1)?;
        let sq = self.contract(mode, 2)?;
        let (n_occ, _) = self.photon_sum_stats(&[mode])?;
        let mean = 2.0 * mu.im;
        let var = 1.0 + 2.0 * n_occ - 2.0 * sq.re - mean * mean;
        Ok((mean, var))
    }

    /// <a_mode^power> for power 1 or 2, against the normalized state.
    fn contract(&self, mode: usize, power: usize) -> Result<Complex64> {
        if mode > 2 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                actual: mode + 1,
            });
        }
        let mut acc = Complex64::ZERO;
        for n0 in 0..self.dim {
            for n1 in 0..self.dim {
                for n2 in 0..self.dim {
                    let ns = [n0, n1, n2];
                    let n = ns[mode];
                    if n + power > self.dim - 1 {
                        continue;
                    }
                    let mut shifted = ns;
                    shifted[mode] = n + power;
                    let mut w = 1.0;
                    for k in 1..=power {
                        w *= (n + k) as f64;
                    }
                    acc += self.amps[self.idx(n0, n1, n2)].conj()
                        * w.sqrt()
                        * self.amps[self.idx(shifted[0], shifted[1], shifted[2])];
                }
            }
        }
        Ok(acc / self.norm_sqr())
    }
}

/// Vacuum in modes 0 and 1 with a real-amplitude coherent state on mode 2.
/// The truncation must hold the Poisson distribution: alpha^2 <= cutoff / 4.
pub fn coherent_on_signal(cutoff: usize, alpha: f64) -> Result<DenseState> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "coherent amplitude {alpha} must be finite and non-negative"
        )));
    }
    if alpha * alpha > cutoff as f64 / 4.0 {
        return Err(Error::InvalidConfig(format!(
            "coherent occupation {} needs a larger basis than cutoff {cutoff}",
            alpha * alpha
        )));
    }
    let mut state = DenseState::vacuum(cutoff);
    state.amps[0] = Complex64::ZERO;
    let mut amp = (-0.5 * alpha * alpha).exp();
    for n in 0..=cutoff {
        if n > 0 {
            amp *= alpha / (n as f64).sqrt();
        }
        let i = state.idx(0, 0, n);
        state.amps[i] = Complex64::from(amp);
    }
    let tail = 1.0 - state.norm_sqr();
    if tail.abs() > LEAKAGE_TOL {
        return Err(Error::TruncationOverflow { leakage: tail });
    }
    Ok(state)
}

/// Applies exp(K) by scaling and splitting: K is halved until a Taylor
/// series converges fast, and the resulting factor is applied 2^s times.
/// `apply_k` must add K acting on `src` into `dst`; `norm_bound` bounds the
/// operator norm of K on the truncated basis.
fn apply_exponential(
    state: &DenseState,
    apply_k: &dyn Fn(&DenseState, &[Complex64], &mut [Complex64]),
    norm_bound: f64,
) -> Result<DenseState> {
    let splits = if norm_bound > 0.5 {
        (norm_bound / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let rounds = 1u64 << splits.min(40);
    let scale = 1.0 / rounds as f64;
    let norm_in = state.norm_sqr();
    let mut current = state.clone();
    let mut term = vec![Complex64::ZERO; current.amps.len()];
    let mut next = vec![Complex64::ZERO; current.amps.len()];
    for _ in 0..rounds {
        let mut acc = current.amps.clone();
        term.copy_from_slice(&current.amps);
        for k in 1..=60u32 {
            next.iter_mut().for_each(|z| *z = Complex64::ZERO);
            apply_k(&current, &term, &mut next);
            let factor = scale / k as f64;
            let mut term_norm = 0.0;
            for (t, n) in term.iter_mut().zip(next.iter()) {
                *t = n * factor;
                term_norm += t.norm_sqr();
            }
            for (a, t) in acc.iter_mut().zip(term.iter()) {
                *a += t;
            }
            if term_norm.sqrt() < TERM_TOL * norm_in.sqrt() {
                break;
            }
        }
        current.amps.copy_from_slice(&acc);
    }
    let leakage = (norm_in - current.norm_sqr()).abs();
    if leakage > LEAKAGE_TOL || current.top_layer_mass() > LEAKAGE_TOL {
        return Err(Error::TruncationOverflow {
            leakage: leakage.max(current.top_layer_mass()),
        });
    }
    Ok(current)
}

/// Two-mode squeezer on modes (0, 1), same convention as the moment engine:
/// a -> G a + g e^{i theta} b^dag. Generated by
/// r (e^{i theta} a^dag b^dag - e^{-i theta} a b) with r = ln(G + g).
pub fn apply_two_mode_squeezer(
    state: &DenseState,
    g_big: f64,
    g_small: f64,
    theta: f64,
) -> Result<DenseState> {
    if !g_big.is_finite() || g_big < 1.0 || g_small < 0.0 {
        return Err(Error::InvalidGain(g_big));
    }
    let r = (g_big + g_small).ln();
    let up = Complex64::from_polar(r, theta);
    let down = Complex64::from_polar(r, -theta);
    let dim = state.dim;
    let apply = move |s: &DenseState, src: &[Complex64], dst: &mut [Complex64]| {
        for n0 in 0..dim {
            for n1 in 0..dim {
                for n2 in 0..dim {
                    let i = s.idx(n0, n1, n2);
                    let mut z = Complex64::ZERO;
                    if n0 > 0 && n1 > 0 {
                        z += up * ((n0 * n1) as f64).sqrt() * src[s.idx(n0 - 1, n1 - 1, n2)];
                    }
                    if n0 + 1 < dim && n1 + 1 < dim {
                        z -= down
                            * (((n0 + 1) * (n1 + 1)) as f64).sqrt()
                            * src[s.idx(n0 + 1, n1 + 1, n2)];
                    }
                    dst[i] += z;
                }
            }
        }
    };
    apply_exponential(state, &apply, 2.0 * r * dim as f64)
}

/// Beam splitter on modes (1, 2): b -> sqrt(T) b + sqrt(R) c. Generated by
/// chi (b^dag c - c^dag b) with chi = atan2(sqrt(R), sqrt(T)).
pub fn apply_beam_splitter(state: &DenseState, t: f64, r: f64) -> Result<DenseState> {
    if !(t.is_finite() && r.is_finite())
        || !(0.0..=1.0).contains(&t)
        || !(0.0..=1.0).contains(&r)
        || (t + r - 1.0).abs() > 1e-12
    {
        return Err(Error::InvalidSplit { t, r });
    }
    let chi = r.sqrt().atan2(t.sqrt());
    let dim = state.dim;
    let apply = move |s: &DenseState, src: &[Complex64], dst: &mut [Complex64]| {
        for n0 in 0..dim {
            for n1 in 0..dim {
                for n2 in 0..dim {
                    let i = s.idx(n0, n1, n2);
                    let mut z = Complex64::ZERO;
                    // b^dag c lowers mode 2 into mode 1.
                    if n1 > 0 && n2 + 1 < dim {
                        z += chi * ((n1 * (n2 + 1)) as f64).sqrt()
                            * src[s.idx(n0, n1 - 1, n2 + 1)];
                    }
                    // c^dag b lowers mode 1 into mode 2.
                    if n2 > 0 && n1 + 1 < dim {
                        z -= chi * (((n1 + 1) * n2) as f64).sqrt()
                            * src[s.idx(n0, n1 + 1, n2 - 1)];
                    }
                    dst[i] += z;
                }
            }
        }
    };
    apply_exponential(state, &apply, 2.0 * chi * dim as f64)
}

/// Phase shift phi on the signal mode, exact and diagonal.
pub fn apply_phase(state: &DenseState, phi: f64) -> DenseState {
    let mut out = state.clone();
    for n0 in 0..out.dim {
        for n1 in 0..out.dim {
            for n2 in 0..out.dim {
                let i = (n0 * out.dim + n1) * out.dim + n2;
                out.amps[i] *= Complex64::from_polar(1.0, phi * n2 as f64);
            }
        }
    }
    out
}

/// Phase-probing state: coherent seed, first squeezer, input splitter.
pub fn prepare_probe(cfg: &InterferometerConfig, cutoff: usize) -> Result<DenseState> {
    let state = coherent_on_signal(cutoff, cfg.alpha())?;
    let state = apply_two_mode_squeezer(&state, cfg.g1_gain(), cfg.g1_small(), cfg.theta1())?;
    apply_beam_splitter(&state, cfg.bs_t(), cfg.bs_r())
}

/// Full lossless device in the number basis.
pub fn evolve_lossless(cfg: &InterferometerConfig, phi: f64, cutoff: usize) -> Result<DenseState> {
    let state = prepare_probe(cfg, cutoff)?;
    let state = apply_phase(&state, phi);
    let state = apply_beam_splitter(&state, cfg.bs_t(), cfg.bs_r())?;
    apply_two_mode_squeezer(&state, cfg.g2_gain(), cfg.g2_small(), cfg.theta2())
}

/// Fisher information 4 Var(n) of the signal-arm photon number for a pure
/// probe with an external phase reference.
pub fn qfi_of_state(state: &DenseState) -> Result<f64> {
    let norm = state.norm_sqr();
    if (norm - 1.0).abs() > LEAKAGE_TOL {
        return Err(Error::Unnormalized(norm));
    }
    let (_, var) = state.photon_sum_stats(&[2])?;
    Ok(4.0 * var)
}

/// Phase-averaged Fisher information computed without any Gaussian
/// assumption: the coherent seed is decomposed into number states, each is
/// pushed through the front end, and the per-input informations are mixed
/// with Poisson weights until the neglected tail drops below 1e-8.
pub fn qfi_phase_averaged_oracle(cfg: &InterferometerConfig, cutoff: usize) -> Result<f64> {
    let mu = cfg.n_c();
    if mu * 4.0 > cutoff as f64 {
        return Err(Error::InvalidConfig(format!(
            "mean photon number {mu} needs a larger basis than cutoff {cutoff}"
        )));
    }
    let mut weight = (-mu).exp();
    let mut covered = 0.0;
    let mut total = 0.0;
    for n in 0..=cutoff {
        if n > 0 {
            weight *= mu / n as f64;
        }
        if weight > 0.0 {
            let input = DenseState::number_state(cutoff, 0, 0, n)?;
            let state =
                apply_two_mode_squeezer(&input, cfg.g1_gain(), cfg.g1_small(), cfg.theta1())?;
            let state = apply_beam_splitter(&state, cfg.bs_t(), cfg.bs_r())?;
            let (_, var) = state.photon_sum_stats(&[2])?;
            total += weight * 4.0 * var;
        }
        covered += weight;
        if 1.0 - covered < LEAKAGE_TOL {
            return Ok(total);
        }
    }
    Err(Error::TruncationOverflow {
        leakage: 1.0 - covered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn small_config() -> InterferometerConfig {
        InterferometerConfig::from_gains_squared(1.0, 1.25, 1.25, 0.0, PI, 0.5, 0.5).unwrap()
    }

    #[test]
    fn coherent_state_is_poissonian_with_unit_quadrature_noise() {
        let state = coherent_on_signal(16, 1.0).unwrap();
        assert!((state.norm_sqr() - 1.0).abs() < 1e-12);
        let (mean, var) = state.photon_sum_stats(&[2]).unwrap();
        assert!((mean - 1.0).abs() < 1e-10);
        assert!((var - 1.0).abs() < 1e-10);
        let (y_mean, y_var) = state.quadrature_y_stats(2).unwrap();
        assert!(y_mean.abs() < 1e-10);
        assert!((y_var - 1.0).abs() < 1e-10);
        assert!((state.mode_mean(2).unwrap() - Complex64::ONE).norm() < 1e-10);
    }

    #[test]
    fn squeezer_populates_both_modes_thermally() {
        let g_big = 1.25_f64.sqrt();
        let state =
            apply_two_mode_squeezer(&DenseState::vacuum(16), g_big, 0.5, 0.7).unwrap();
        let (na, _) = state.photon_sum_stats(&[0]).unwrap();
        let (nb, _) = state.photon_sum_stats(&[1]).unwrap();
        assert!((na - 0.25).abs() < 1e-7);
        assert!((nb - 0.25).abs() < 1e-7);
        // Pair emission: variance of n_a + n_b is 4 g^2 (1 + g^2).
        let (_, var) = state.photon_sum_stats(&[0, 1]).unwrap();
        assert!((var - 4.0 * 0.25 * 1.25).abs() < 1e-7);
    }

    #[test]
    fn beam_splitter_routes_coherent_light() {
        let state = coherent_on_signal(16, 1.2).unwrap();
        let split = apply_beam_splitter(&state, 0.7, 0.3).unwrap();
        let (nb, _) = split.photon_sum_stats(&[1]).unwrap();
        let (nc, _) = split.photon_sum_stats(&[2]).unwrap();
        // b picks up the R share of the signal, c keeps the T share.
        assert!((nb - 0.3 * 1.44).abs() < 1e-10);
        assert!((nc - 0.7 * 1.44).abs() < 1e-10);
        let (_, var_total) = split.photon_sum_stats(&[1, 2]).unwrap();
        assert!((var_total - 1.44).abs() < 1e-10);
    }

    #[test]
    fn phase_shift_rotates_the_signal_mean() {
        let state = coherent_on_signal(16, 1.0).unwrap();
        let rotated = apply_phase(&state, 0.8);
        let mu = rotated.mode_mean(2).unwrap();
        assert!((mu - Complex64::from_polar(1.0, 0.8)).norm() < 1e-10);
    }

    #[test]
    fn probe_information_matches_the_closed_form() {
        let cfg = small_config();
        let probe = prepare_probe(&cfg, 16).unwrap();
        let f = qfi_of_state(&probe).unwrap();
        assert!((f - 3.0625).abs() < 1e-6, "qfi {f}");
    }

    #[test]
    fn phase_averaged_information_matches_the_closed_form() {
        // The splitter spreads each photon-number manifold across its full
        // width, so the basis needs roomy headroom over the largest kept
        // Poisson component.
        let cfg = small_config();
        let f = qfi_phase_averaged_oracle(&cfg, 24).unwrap();
        assert!((f - 2.0625).abs() < 1e-6, "qfi {f}");
    }

    #[test]
    fn truncation_failures_are_reported() {
        assert!(coherent_on_signal(8, 3.0).is_err());
        let tight = DenseState::vacuum(6);
        assert!(matches!(
            apply_two_mode_squeezer(&tight, 2.0, 3.0_f64.sqrt(), 0.0),
            Err(Error::TruncationOverflow { .. })
        ));
        let mut bad = DenseState::vacuum(4);
        bad.amps[0] = Complex64::from(0.5);
        assert!(matches!(qfi_of_state(&bad), Err(Error::Unnormalized(_))));
    }
}
