//! Brute-force references: full 2^n Hilbert-space evolution built from
//! explicit operator tensor products, and direct spherical quadrature of the
//! input-state average. These validate the sector solver and the closed-form
//! fidelity; they never appear on a performance path.

use num_complex::Complex64 as C64;

use crate::evolve::step_edges;
use crate::fidelity::FidelityError;
use crate::model::{merged_breakpoints, ChainSpec, CouplingSchedule, Side};
use crate::Error;

/// Dense 2^n matrices get unwieldy past this chain length.
pub const MAX_FULL_SPACE_QUBITS: usize = 12;

const ID: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, 1.0]];
const SZ: [[f64; 2]; 2] = [[-1.0, 0.0], [0.0, 1.0]];
const SPLUS: [[f64; 2]; 2] = [[0.0, 0.0], [1.0, 0.0]];
const SMINUS: [[f64; 2]; 2] = [[0.0, 1.0], [0.0, 0.0]];

/// Dense Kronecker product, row-major.
fn kron(a: &[f64], da: usize, b: &[f64], db: usize) -> Vec<f64> {
    let d = da * db;
    let mut out = vec![0.0; d * d];
    for ia in 0..da {
        for ja in 0..da {
            let av = a[ia * da + ja];
            if av == 0.0 {
                continue;
            }
            for ib in 0..db {
                for jb in 0..db {
                    out[(ia * db + ib) * d + (ja * db + jb)] = av * b[ib * db + jb];
                }
            }
        }
    }
    out
}

/// Tensor product over the whole chain with the given single-site factors
/// (1-based sites; everything else identity). Site 1 is the least
/// significant bit of the basis index.
fn site_product(n: usize, factors: &[(usize, [[f64; 2]; 2])]) -> Vec<f64> {
    let mut acc = vec![1.0];
    let mut dim = 1usize;
    for site in (1..=n).rev() {
        let f = factors
            .iter()
            .find(|(s, _)| *s == site)
            .map(|(_, m)| *m)
            .unwrap_or(ID);
        let flat: Vec<f64> = f.iter().flatten().cloned().collect();
        acc = kron(&acc, dim, &flat, 2);
        dim *= 2;
    }
    acc
}

fn add_scaled(target: &mut [f64], source: &[f64], scale: f64) {
    for (t, s) in target.iter_mut().zip(source) {
        *t += scale * s;
    }
}

/// Hopping operator of the bond between sites `i` and `i+1`.
fn hop_operator(n: usize, i: usize) -> Vec<f64> {
    let mut m = site_product(n, &[(i + 1, SPLUS), (i, SMINUS)]);
    let other = site_product(n, &[(i + 1, SMINUS), (i, SPLUS)]);
    add_scaled(&mut m, &other, 1.0);
    m
}

/// The full 2^n Hamiltonian split into its static part and the two
/// schedule-scaled end-bond operators.
pub struct FullSpace {
    n: usize,
    dim: usize,
    h_static: Vec<f64>,
    bond_first: Vec<f64>,
    bond_last: Vec<f64>,
    sched_first: CouplingSchedule,
    sched_last: CouplingSchedule,
}

impl FullSpace {
    pub fn build(
        spec: &ChainSpec,
        sched_first: CouplingSchedule,
        sched_last: CouplingSchedule,
    ) -> Result<Self, Error> {
        spec.validate()?;
        sched_first.validate()?;
        sched_last.validate()?;
        if spec.n > MAX_FULL_SPACE_QUBITS {
            return Err(Error::OracleTooLarge { n: spec.n, cap: MAX_FULL_SPACE_QUBITS });
        }
        let n = spec.n;
        let dim = 1usize << n;
        let mut h_static = vec![0.0; dim * dim];

        // Interior hopping bonds (bond i joins sites i and i+1).
        for bond in 2..n.saturating_sub(1) {
            let j = -spec.j_xy * (1.0 + spec.bond_disorder[bond - 1]);
            add_scaled(&mut h_static, &hop_operator(n, bond), j);
        }
        // Ising and field terms.
        for bond in 1..n {
            let zz = site_product(n, &[(bond, SZ), (bond + 1, SZ)]);
            add_scaled(&mut h_static, &zz, -spec.j_z);
        }
        for site in 1..=n {
            let z = site_product(n, &[(site, SZ)]);
            add_scaled(&mut h_static, &z, -spec.b);
        }

        let mut bond_first = hop_operator(n, 1);
        for v in bond_first.iter_mut() {
            *v *= -spec.j_xy * (1.0 + spec.bond_disorder[0]);
        }
        let bond_last = if n == 2 {
            // Single bond: both end multipliers act on it (applied jointly
            // in `matvec`), so there is no separate last-bond operator.
            vec![0.0; dim * dim]
        } else {
            let mut m = hop_operator(n, n - 1);
            for v in m.iter_mut() {
                *v *= -spec.j_xy * (1.0 + spec.bond_disorder[n - 2]);
            }
            m
        };

        Ok(Self { n, dim, h_static, bond_first, bond_last, sched_first, sched_last })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn matvec(&self, t: f64, side: Side, x: &[C64], y: &mut [C64]) {
        let g1 = self.sched_first.value_sided(t, side);
        let g_n = self.sched_last.value_sided(t, side);
        let (m1, mn) = if self.n == 2 { (g1 * g_n, 0.0) } else { (g1, g_n) };
        for i in 0..self.dim {
            let row = i * self.dim;
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..self.dim {
                let h = self.h_static[row + j] + m1 * self.bond_first[row + j]
                    + mn * self.bond_last[row + j];
                if h != 0.0 {
                    acc += h * x[j];
                }
            }
            y[i] = acc;
        }
    }

    /// One RK4 step of `i dpsi/dt = H(t) psi` on `[ts, te]`.
    fn rk4_step(&self, ts: f64, te: f64, psi: &mut [C64], work: &mut StepWork) {
        let h = te - ts;
        let tm = 0.5 * (ts + te);
        let dim = self.dim;
        let mul_minus_i = |v: &mut [C64]| {
            for z in v.iter_mut() {
                *z = C64::new(z.im, -z.re);
            }
        };
        self.matvec(ts, Side::Above, psi, &mut work.k1);
        mul_minus_i(&mut work.k1);
        for j in 0..dim {
            work.tmp[j] = psi[j] + 0.5 * h * work.k1[j];
        }
        self.matvec(tm, Side::Above, &work.tmp, &mut work.k2);
        mul_minus_i(&mut work.k2);
        for j in 0..dim {
            work.tmp[j] = psi[j] + 0.5 * h * work.k2[j];
        }
        self.matvec(tm, Side::Above, &work.tmp, &mut work.k3);
        mul_minus_i(&mut work.k3);
        for j in 0..dim {
            work.tmp[j] = psi[j] + h * work.k3[j];
        }
        self.matvec(te, Side::Below, &work.tmp, &mut work.k4);
        mul_minus_i(&mut work.k4);
        for j in 0..dim {
            psi[j] += h / 6.0 * (work.k1[j] + 2.0 * work.k2[j] + 2.0 * work.k3[j] + work.k4[j]);
        }
    }

    fn edges(&self, t_end: f64, dt: f64) -> Vec<f64> {
        let bps = merged_breakpoints(&self.sched_first, &self.sched_last, 0.0, t_end);
        step_edges(0.0, t_end, &bps, dt)
    }
}

struct StepWork {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl StepWork {
    fn new(dim: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); dim];
        Self { k1: z.clone(), k2: z.clone(), k3: z.clone(), k4: z.clone(), tmp: z }
    }
}

/// `|psi_in, 0...0>` with the input on site 1.
fn product_input(dim: usize, alpha: C64, beta: C64) -> Vec<C64> {
    let mut psi = vec![C64::new(0.0, 0.0); dim];
    psi[0] = alpha;
    psi[1] = beta; // site 1 is bit 0
    psi
}

/// Reduced density matrix of the last site (the basis index's most
/// significant bit): `rho[a][b] = sum_r psi[(a,r)] conj(psi[(b,r)])`.
pub fn partial_trace_last(psi: &[C64]) -> [[C64; 2]; 2] {
    let half = psi.len() / 2;
    let mut rho = [[C64::new(0.0, 0.0); 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let mut acc = C64::new(0.0, 0.0);
            for r in 0..half {
                acc += psi[a * half + r] * psi[b * half + r].conj();
            }
            rho[a][b] = acc;
        }
    }
    rho
}

/// Total-magnetization expectation `sum_i <sigma_z^i>` of a full-space state.
pub fn magnetization_expectation(psi: &[C64], n: usize) -> f64 {
    psi.iter()
        .enumerate()
        .map(|(x, z)| (2.0 * (x.count_ones() as f64) - n as f64) * z.norm_sqr())
        .sum()
}

/// Evolves `|psi_in, 0...0>` in the full 2^n space and returns the last
/// site's reduced density matrix at `t_end`.
pub fn full_space_evolve(
    spec: &ChainSpec,
    sched_first: CouplingSchedule,
    sched_last: CouplingSchedule,
    input: (C64, C64),
    t_end: f64,
    dt: f64,
) -> Result<[[C64; 2]; 2], Error> {
    let (alpha, beta) = input;
    let norm = alpha.norm_sqr() + beta.norm_sqr();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(FidelityError::Unnormalized { norm }.into());
    }
    let sim = FullSpace::build(spec, sched_first, sched_last)?;
    let mut psi = product_input(sim.dim, alpha, beta);
    let mut work = StepWork::new(sim.dim);
    for w in sim.edges(t_end, dt).windows(2) {
        sim.rk4_step(w[0], w[1], &mut psi, &mut work);
    }
    Ok(partial_trace_last(&psi))
}

/// Exact Bloch-sphere average of `<psi_in|rho_out|psi_in>` for a channel
/// given through the four transfer matrices of the vacuum/excitation basis
/// runs. The integrand is quadratic in the input's Bloch vector, so the
/// six-axis average is exact.
fn axis_average(t: &[[[C64; 2]; 2]; 4]) -> f64 {
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let axes = [
        (C64::new(1.0, 0.0), C64::new(0.0, 0.0)),
        (C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
        (C64::new(inv_sqrt2, 0.0), C64::new(inv_sqrt2, 0.0)),
        (C64::new(inv_sqrt2, 0.0), C64::new(-inv_sqrt2, 0.0)),
        (C64::new(inv_sqrt2, 0.0), C64::new(0.0, inv_sqrt2)),
        (C64::new(inv_sqrt2, 0.0), C64::new(0.0, -inv_sqrt2)),
    ];
    let mut sum = 0.0;
    for (alpha, beta) in axes {
        let rho = channel_rho(t, alpha, beta);
        sum += overlap(&rho, alpha, beta);
    }
    sum / 6.0
}

/// `rho_out(alpha, beta)` assembled by linearity from the basis-run transfer
/// matrices `t = [T_vv, T_ve, T_ev, T_ee]`.
fn channel_rho(t: &[[[C64; 2]; 2]; 4], alpha: C64, beta: C64) -> [[C64; 2]; 2] {
    let coeffs = [
        alpha * alpha.conj(),
        alpha * beta.conj(),
        alpha.conj() * beta,
        beta * beta.conj(),
    ];
    let mut rho = [[C64::new(0.0, 0.0); 2]; 2];
    for (c, tm) in coeffs.iter().zip(t.iter()) {
        for a in 0..2 {
            for b in 0..2 {
                rho[a][b] += c * tm[a][b];
            }
        }
    }
    rho
}

fn overlap(rho: &[[C64; 2]; 2], alpha: C64, beta: C64) -> f64 {
    let psi = [alpha, beta];
    let mut acc = C64::new(0.0, 0.0);
    for a in 0..2 {
        for b in 0..2 {
            acc += psi[a].conj() * rho[a][b] * psi[b];
        }
    }
    acc.re
}

/// `Tr_rest |psi_m><psi_n|` restricted to the last site.
fn cross_trace_last(m: &[C64], n_state: &[C64]) -> [[C64; 2]; 2] {
    let half = m.len() / 2;
    let mut t = [[C64::new(0.0, 0.0); 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let mut acc = C64::new(0.0, 0.0);
            for r in 0..half {
                acc += m[a * half + r] * n_state[b * half + r].conj();
            }
            t[a][b] = acc;
        }
    }
    t
}

/// Full-space reference trace of the Bloch-averaged fidelity.
///
/// Evolves the vacuum-input and excitation-input product states side by
/// side, reconstructs the receiving qubit's channel at every step by
/// linearity, and averages exactly over the six axis states. Time grid and
/// stage evaluations match the sector integrator's, so the two solvers are
/// comparable pointwise.
pub fn full_space_fidelity_trace(
    spec: &ChainSpec,
    sched_first: CouplingSchedule,
    sched_last: CouplingSchedule,
    t_end: f64,
    dt: f64,
) -> Result<Vec<(f64, f64)>, Error> {
    let sim = FullSpace::build(spec, sched_first, sched_last)?;
    let mut psi_vac = product_input(sim.dim, C64::new(1.0, 0.0), C64::new(0.0, 0.0));
    let mut psi_exc = product_input(sim.dim, C64::new(0.0, 0.0), C64::new(1.0, 0.0));
    let mut work = StepWork::new(sim.dim);

    let sample = |pv: &[C64], pe: &[C64]| {
        let t_matrices = [
            cross_trace_last(pv, pv),
            cross_trace_last(pv, pe),
            cross_trace_last(pe, pv),
            cross_trace_last(pe, pe),
        ];
        axis_average(&t_matrices)
    };

    let edges = sim.edges(t_end, dt);
    let mut out = Vec::with_capacity(edges.len());
    out.push((0.0, sample(&psi_vac, &psi_exc)));
    for w in edges.windows(2) {
        sim.rk4_step(w[0], w[1], &mut psi_vac, &mut work);
        sim.rk4_step(w[0], w[1], &mut psi_exc, &mut work);
        out.push((w[1], sample(&psi_vac, &psi_exc)));
    }
    Ok(out)
}

/// Equal-weight Fibonacci-sphere quadrature of
/// `<psi_in| rho_map(psi_in) |psi_in>` over all pure qubit inputs.
pub fn bloch_average_quadrature<F>(rho_map: F, n_points: usize) -> f64
where
    F: Fn(C64, C64) -> [[C64; 2]; 2],
{
    assert!(n_points >= 100, "quadrature needs at least 100 points");
    let golden_angle = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    let mut sum = 0.0;
    for k in 0..n_points {
        let z = 1.0 - 2.0 * (k as f64 + 0.5) / n_points as f64;
        let theta = z.acos();
        let phi = golden_angle * k as f64;
        let alpha = C64::new((theta / 2.0).cos(), 0.0);
        let beta = C64::from_polar((theta / 2.0).sin(), phi);
        sum += overlap(&rho_map(alpha, beta), alpha, beta);
    }
    sum / n_points as f64
}

/// The receiving qubit's density matrix implied by a sector state, for an
/// input `alpha|0> + beta|1>` on the sender.
pub fn sector_rho_out(
    vac_phase: C64,
    transfer_amp: C64,
    alpha: C64,
    beta: C64,
) -> [[C64; 2]; 2] {
    let f = transfer_amp;
    let p_arrived = beta.norm_sqr() * f.norm_sqr();
    let coherence = alpha * beta.conj() * vac_phase * f.conj();
    [
        [C64::new(1.0 - p_arrived, 0.0), coherence],
        [coherence.conj(), C64::new(p_arrived, 0.0)],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{evolve, IntegratorConfig, SectorState};
    use crate::fidelity::FidelitySample;
    use crate::model::build_hamiltonian;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn rejects_chains_beyond_the_cap() {
        let spec = ChainSpec::uniform(13);
        assert!(matches!(
            FullSpace::build(&spec, CouplingSchedule::Static, CouplingSchedule::Static),
            Err(Error::OracleTooLarge { n: 13, cap: 12 })
        ));
    }

    #[test]
    fn two_site_swap_lands_excitation() {
        let spec = ChainSpec::uniform(2);
        let rho = full_space_evolve(
            &spec,
            CouplingSchedule::Static,
            CouplingSchedule::Static,
            (c(0.0, 0.0), c(1.0, 0.0)),
            std::f64::consts::FRAC_PI_2,
            0.005,
        )
        .unwrap();
        assert!((rho[1][1].re - 1.0).abs() < 1e-8);
        assert!(rho[0][0].re < 1e-8);
    }

    #[test]
    fn vacuum_input_stays_vacuum() {
        let spec = ChainSpec::new(5, 1.0, 0.4, 0.3, vec![0.0; 4]).unwrap();
        let rho = full_space_evolve(
            &spec,
            CouplingSchedule::FermiOn { t_i: 0.0, tau: 0.5 },
            CouplingSchedule::FermiOff { t_f: 3.0, tau: 0.5 },
            (c(1.0, 0.0), c(0.0, 0.0)),
            4.0,
            0.005,
        )
        .unwrap();
        assert!((rho[0][0].re - 1.0).abs() < 1e-10);
        assert!(rho[1][1].norm() < 1e-10);
    }

    #[test]
    fn sector_diagonal_matches_full_space() {
        // Single-excitation expectations of the dense operator reproduce the
        // tridiagonal view, including the anisotropy boundary structure.
        let spec = ChainSpec::new(4, 1.0, 1.0, 0.3, vec![0.0; 3]).unwrap();
        let sim =
            FullSpace::build(&spec, CouplingSchedule::Static, CouplingSchedule::Static).unwrap();
        let h = build_hamiltonian(&spec, CouplingSchedule::Static, CouplingSchedule::Static)
            .unwrap();
        let dim = sim.dim;
        let entry = |i: usize, j: usize| {
            sim.h_static[i * dim + j] + sim.bond_first[i * dim + j] + sim.bond_last[i * dim + j]
        };
        assert!((entry(0, 0) - h.vacuum_energy()).abs() < 1e-12);
        for site in 0..4 {
            let idx = 1usize << site;
            assert!(
                (entry(idx, idx) - h.diag()[site]).abs() < 1e-12,
                "site {site}: {} vs {}",
                entry(idx, idx),
                h.diag()[site]
            );
        }
        let off = h.offdiag(0.0);
        for bond in 0..3 {
            let i = 1usize << bond;
            let j = 1usize << (bond + 1);
            assert!((entry(i, j) - off[bond]).abs() < 1e-12);
        }
    }

    #[test]
    fn magnetization_is_conserved() {
        let spec = ChainSpec::new(5, 1.0, 0.3, 0.1, vec![0.0; 4]).unwrap();
        let sim = FullSpace::build(
            &spec,
            CouplingSchedule::FermiOn { t_i: 0.0, tau: 0.5 },
            CouplingSchedule::FermiOff { t_f: 3.0, tau: 0.5 },
        )
        .unwrap();
        let mut psi = product_input(sim.dim, c(0.6, 0.0), c(0.0, 0.8));
        let m0 = magnetization_expectation(&psi, 5);
        let mut work = StepWork::new(sim.dim);
        let mut worst = 0.0f64;
        for w in sim.edges(6.0, 0.005).windows(2) {
            sim.rk4_step(w[0], w[1], &mut psi, &mut work);
            worst = worst.max((magnetization_expectation(&psi, 5) - m0).abs());
        }
        assert!(worst < 1e-10, "magnetization drift {worst:.2e}");
    }

    #[test]
    fn partial_trace_is_a_density_matrix() {
        let spec = ChainSpec::uniform(6);
        let rho = full_space_evolve(
            &spec,
            CouplingSchedule::FermiOn { t_i: 0.0, tau: 0.4 },
            CouplingSchedule::FermiOff { t_f: 3.5, tau: 0.4 },
            (c(0.48, 0.36), c(0.0, -0.8)),
            5.0,
            0.005,
        )
        .unwrap();
        // Hermitian, unit trace, PSD.
        assert!((rho[0][1] - rho[1][0].conj()).norm() < 1e-12);
        assert!((rho[0][0].im).abs() < 1e-12 && (rho[1][1].im).abs() < 1e-12);
        assert!((rho[0][0].re + rho[1][1].re - 1.0).abs() < 1e-8);
        let tr = rho[0][0].re + rho[1][1].re;
        let det = (rho[0][0] * rho[1][1] - rho[0][1] * rho[1][0]).re;
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        let lambda_min = tr / 2.0 - disc;
        assert!(lambda_min > -1e-12, "negative eigenvalue {lambda_min:.2e}");
    }

    #[test]
    fn sector_and_full_space_agree_on_rho_out() {
        // Nonzero anisotropy and field exercise the phase conventions.
        let spec = ChainSpec::new(6, 1.0, 0.35, 0.2, vec![0.0; 5]).unwrap();
        let on = CouplingSchedule::FermiOn { t_i: 0.0, tau: 0.5 };
        let off = CouplingSchedule::FermiOff { t_f: 3.0, tau: 0.5 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..3 {
            let theta: f64 = rng.random::<f64>() * std::f64::consts::PI;
            let phi: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            let alpha = c((theta / 2.0).cos(), 0.0);
            let beta = C64::from_polar((theta / 2.0).sin(), phi);
            let t_end = 5.0;

            let rho_full =
                full_space_evolve(&spec, on.clone(), off.clone(), (alpha, beta), t_end, 0.005)
                    .unwrap();

            let h = build_hamiltonian(&spec, on.clone(), off.clone()).unwrap();
            let init = SectorState::sender_excitation(6);
            let cfg = IntegratorConfig::with_dt(0.005).unwrap();
            let end = evolve(&h, &init, t_end, &cfg, |_| {}).unwrap();
            let rho_sector =
                sector_rho_out(end.vac_phase, end.transfer_amplitude(), alpha, beta);

            for a in 0..2 {
                for b in 0..2 {
                    let d = (rho_full[a][b] - rho_sector[a][b]).norm();
                    assert!(d < 1e-8, "rho[{a}][{b}] differs by {d:.2e}");
                }
            }
        }
    }

    #[test]
    fn full_space_trace_matches_sector_fidelity() {
        let spec = ChainSpec::new(5, 1.0, 0.25, -0.15, vec![0.0; 4]).unwrap();
        let on = CouplingSchedule::FermiOn { t_i: 0.0, tau: 0.4 };
        let off = CouplingSchedule::FermiOff { t_f: 2.5, tau: 0.4 };
        let dt = 0.01;
        let t_end = 5.0;
        let reference =
            full_space_fidelity_trace(&spec, on.clone(), off.clone(), t_end, dt).unwrap();

        let h = build_hamiltonian(&spec, on, off).unwrap();
        let init = SectorState::sender_excitation(5);
        let cfg = IntegratorConfig::with_dt(dt).unwrap();
        let mut sector = Vec::new();
        evolve(&h, &init, t_end, &cfg, |s| {
            sector.push((s.t, FidelitySample::from_state_unchecked(s).f_avg));
        })
        .unwrap();

        assert_eq!(reference.len(), sector.len());
        let mut worst = 0.0f64;
        for ((t1, f1), (t2, f2)) in reference.iter().zip(&sector) {
            assert!((t1 - t2).abs() < 1e-12);
            worst = worst.max((f1 - f2).abs());
        }
        assert!(worst < 1e-6, "max averaged-fidelity deviation {worst:.2e}");
    }

    #[test]
    fn quadrature_identity_and_mixed_channels() {
        let identity = |alpha: C64, beta: C64| {
            [
                [alpha * alpha.conj(), alpha * beta.conj()],
                [beta * alpha.conj(), beta * beta.conj()],
            ]
        };
        assert!((bloch_average_quadrature(identity, 2000) - 1.0).abs() < 1e-12);
        let mixed =
            |_: C64, _: C64| [[c(0.5, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.5, 0.0)]];
        assert!((bloch_average_quadrature(mixed, 2000) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn quadrature_validates_closed_form_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let f = C64::from_polar(rng.random::<f64>(), rng.random::<f64>() * std::f64::consts::TAU);
            let vac = C64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU);
            let rest = (1.0 - f.norm_sqr()).max(0.0).sqrt();
            let state = SectorState {
                t: 0.0,
                vac_phase: vac,
                amp: vec![c(rest, 0.0), f],
            };
            let closed = FidelitySample::from_state_unchecked(&state).f_avg;
            let quad =
                bloch_average_quadrature(|a, b| sector_rho_out(vac, f, a, b), 20_000);
            assert!(
                (closed - quad).abs() < 1e-6,
                "closed {closed} vs quadrature {quad}"
            );
        }
    }

    #[test]
    fn rejects_unnormalized_input() {
        let spec = ChainSpec::uniform(3);
        assert!(full_space_evolve(
            &spec,
            CouplingSchedule::Static,
            CouplingSchedule::Static,
            (c(1.0, 0.0), c(0.5, 0.0)),
            1.0,
            0.01,
        )
        .is_err());
    }
}
