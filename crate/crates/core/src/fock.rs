//! Brute-force Fock-space ground truth for the analytic engine.
//!
//! States are sparse maps from occupation vectors to complex amplitudes.
//! Modes are registered per grid entry: the two signal modes `S1`, `S2`,
//! the aligned idler `I1` (the mirror-image mode reaching the object), and
//! the environment port `ENV` of the object beamsplitter. The idler of the
//! second crystal has no mode of its own; alignment through the object
//! rewrites `a_I2 = (T a_I1 + R' a_ENV) e^{i phi_I}`.
//!
//! With the sinc envelope enabled, a weight `w` is modelled as the overlap of
//! the first crystal's idler with the aligned mode; the remainder
//! `sqrt(1 - w^2)` goes to an unaligned `STRAY` mode.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::imaging::counting_rate;
use crate::mode_space::{Envelope, ModeGrid, OpticalConfig};
use crate::optics::Transmission;

/// Amplitudes below this magnitude are dropped after every operation. This is
/// a numerical cutoff, not a physical one.
pub const PRUNE_THRESHOLD: f64 = 1e-15;

pub const DEFAULT_N_MAX: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ModeKind {
    Signal1,
    Signal2,
    Idler1,
    Environment,
    Stray,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ModeLabel {
    pub kind: ModeKind,
    /// Index of the grid entry the mode belongs to.
    pub entry: usize,
}

#[derive(Debug, Clone)]
pub struct ModeRegistry {
    labels: Vec<ModeLabel>,
    lookup: HashMap<ModeLabel, usize>,
}

impl ModeRegistry {
    pub fn for_grid(grid: &ModeGrid, envelope: Envelope) -> Self {
        let mut kinds = vec![
            ModeKind::Signal1,
            ModeKind::Signal2,
            ModeKind::Idler1,
            ModeKind::Environment,
        ];
        if envelope == Envelope::Sinc {
            kinds.push(ModeKind::Stray);
        }
        let labels: Vec<ModeLabel> = (0..grid.entries.len())
            .flat_map(|entry| kinds.iter().map(move |&kind| ModeLabel { kind, entry }))
            .collect();
        let lookup = labels.iter().enumerate().map(|(i, l)| (*l, i)).collect();
        ModeRegistry { labels, lookup }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index(&self, kind: ModeKind, entry: usize) -> Option<usize> {
        self.lookup.get(&ModeLabel { kind, entry }).copied()
    }

    pub fn label(&self, index: usize) -> ModeLabel {
        self.labels[index]
    }

    fn expect(&self, kind: ModeKind, entry: usize) -> usize {
        self.index(kind, entry)
            .unwrap_or_else(|| panic!("mode {kind:?} of entry {entry} is not registered"))
    }
}

/// Sorted `(mode, count)` pairs with nonzero counts.
pub type Occupation = Vec<(usize, u32)>;

pub fn total_photons(occ: &Occupation) -> u32 {
    occ.iter().map(|&(_, n)| n).sum()
}

pub fn occupation_of(occ: &Occupation, mode: usize) -> u32 {
    occ.binary_search_by_key(&mode, |&(m, _)| m)
        .map(|i| occ[i].1)
        .unwrap_or(0)
}

/// Unnormalised truncated multimode Fock state.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    terms: BTreeMap<Occupation, Complex64>,
    n_max: u32,
}

impl FockState {
    pub fn vacuum(n_max: u32) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(Vec::new(), Complex64::new(1.0, 0.0));
        FockState { terms, n_max }
    }

    pub fn zero(n_max: u32) -> Self {
        FockState {
            terms: BTreeMap::new(),
            n_max,
        }
    }

    /// Single basis state with unit amplitude.
    pub fn basis(occ: &[(usize, u32)], n_max: u32) -> Result<Self> {
        let mut key: Occupation = occ.iter().copied().filter(|&(_, n)| n > 0).collect();
        key.sort_unstable();
        if let Some(&(mode, occupation)) = key.iter().find(|&&(_, n)| n > n_max) {
            return Err(Error::TruncationOverflow {
                mode,
                occupation,
                n_max,
            });
        }
        let mut terms = BTreeMap::new();
        terms.insert(key, Complex64::new(1.0, 0.0));
        Ok(FockState { terms, n_max })
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Occupation, &Complex64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn amplitude(&self, occ: &[(usize, u32)]) -> Complex64 {
        let mut key: Occupation = occ.iter().copied().filter(|&(_, n)| n > 0).collect();
        key.sort_unstable();
        self.terms.get(&key).copied().unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    fn accumulate(&mut self, occ: Occupation, amp: Complex64) {
        *self.terms.entry(occ).or_default() += amp;
    }

    fn pruned(mut self) -> Self {
        self.terms.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
        self
    }

    pub fn add(&self, other: &FockState) -> FockState {
        let mut out = self.clone();
        for (occ, &amp) in &other.terms {
            out.accumulate(occ.clone(), amp);
        }
        out.pruned()
    }

    pub fn scale(&self, c: Complex64) -> FockState {
        let mut out = self.clone();
        out.terms.values_mut().for_each(|a| *a *= c);
        out.pruned()
    }

    /// `a_mode |self>`.
    pub fn annihilate(&self, mode: usize) -> FockState {
        let mut out = FockState::zero(self.n_max);
        for (occ, &amp) in &self.terms {
            if let Ok(i) = occ.binary_search_by_key(&mode, |&(m, _)| m) {
                let n = occ[i].1;
                let mut next = occ.clone();
                if n == 1 {
                    next.remove(i);
                } else {
                    next[i].1 = n - 1;
                }
                out.accumulate(next, amp * (n as f64).sqrt());
            }
        }
        out.pruned()
    }

    /// `a_mode^dagger |self>`.
    pub fn create(&self, mode: usize) -> Result<FockState> {
        let mut out = FockState::zero(self.n_max);
        for (occ, &amp) in &self.terms {
            let (next, n) = raise(occ, mode);
            if n + 1 > self.n_max {
                return Err(Error::TruncationOverflow {
                    mode,
                    occupation: n + 1,
                    n_max: self.n_max,
                });
            }
            out.accumulate(next, amp * ((n + 1) as f64).sqrt());
        }
        Ok(out.pruned())
    }

    /// `sum_j c_j a_{p_j}^dagger a_{q_j}^dagger |self>`.
    pub fn apply_pairs(&self, pairs: &[PairTerm]) -> Result<FockState> {
        let mut out = FockState::zero(self.n_max);
        for (occ, &amp) in &self.terms {
            for pair in pairs {
                let (first, n1) = raise(occ, pair.modes[0]);
                let (second, n2) = raise(&first, pair.modes[1]);
                for (mode, n) in [(pair.modes[0], n1), (pair.modes[1], n2)] {
                    if n + 1 > self.n_max {
                        return Err(Error::TruncationOverflow {
                            mode,
                            occupation: n + 1,
                            n_max: self.n_max,
                        });
                    }
                }
                let factor = (((n1 + 1) * (n2 + 1)) as f64).sqrt();
                out.accumulate(second, amp * pair.coeff * factor);
            }
        }
        Ok(out.pruned())
    }
}

/// Occupation with `mode` raised by one, and the count before raising.
fn raise(occ: &Occupation, mode: usize) -> (Occupation, u32) {
    let mut next = occ.clone();
    match next.binary_search_by_key(&mode, |&(m, _)| m) {
        Ok(i) => {
            let n = next[i].1;
            next[i].1 = n + 1;
            (next, n)
        }
        Err(i) => {
            next.insert(i, (mode, 1));
            (next, 0)
        }
    }
}

/// One term `coeff * a_p^dagger a_q^dagger` of a pair-creation operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTerm {
    pub coeff: Complex64,
    pub modes: [usize; 2],
}

/// Which transmission enters the second-crystal branch. `Conjugate` is the
/// physical one; `Direct` exists to show that the sign convention is observable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchConvention {
    Conjugate,
    Direct,
}

/// Fock-space model of the interferometer over a mode grid.
pub struct FockOracle<'a> {
    grid: &'a ModeGrid,
    cfg: &'a OpticalConfig,
    registry: ModeRegistry,
    n_max: u32,
}

impl<'a> FockOracle<'a> {
    pub fn new(grid: &'a ModeGrid, cfg: &'a OpticalConfig) -> Self {
        Self::with_n_max(grid, cfg, DEFAULT_N_MAX)
    }

    pub fn with_n_max(grid: &'a ModeGrid, cfg: &'a OpticalConfig, n_max: u32) -> Self {
        FockOracle {
            grid,
            cfg,
            registry: ModeRegistry::for_grid(grid, cfg.envelope),
            n_max,
        }
    }

    pub fn registry(&self) -> &ModeRegistry {
        &self.registry
    }

    /// Pair amplitudes `G1 = g V1`, `G2 = g V2 e^{i phi_P}`.
    pub fn pair_amplitudes(&self, phi_p: f64) -> [Complex64; 2] {
        let g = self.cfg.pair_scale;
        [
            self.cfg.pump(1) * g,
            self.cfg.pump(2) * Complex64::from_polar(g, phi_p),
        ]
    }

    fn crystal1_pairs(&self, g1: Complex64) -> Vec<PairTerm> {
        let mut pairs = Vec::new();
        for (k, entry) in self.grid.entries.iter().enumerate() {
            let s1 = self.registry.expect(ModeKind::Signal1, k);
            let i1 = self.registry.expect(ModeKind::Idler1, k);
            pairs.push(PairTerm {
                coeff: g1 * entry.weight,
                modes: [s1, i1],
            });
            if let Some(stray) = self.registry.index(ModeKind::Stray, k) {
                let rest = (1.0 - entry.weight * entry.weight).max(0.0).sqrt();
                pairs.push(PairTerm {
                    coeff: g1 * rest,
                    modes: [s1, stray],
                });
            }
        }
        pairs
    }

    fn crystal2_pairs<O: Transmission + ?Sized>(
        &self,
        obj: &O,
        g2: Complex64,
        convention: BranchConvention,
    ) -> Vec<PairTerm> {
        let align = g2 * Complex64::from_polar(1.0, -self.cfg.phi_i0);
        let mut pairs = Vec::new();
        for (k, entry) in self.grid.entries.iter().enumerate() {
            let s2 = self.registry.expect(ModeKind::Signal2, k);
            let i1 = self.registry.expect(ModeKind::Idler1, k);
            let env = self.registry.expect(ModeKind::Environment, k);
            let sample = obj.sample(entry.object_point);
            let t = match convention {
                BranchConvention::Conjugate => sample.t.conj(),
                BranchConvention::Direct => sample.t,
            };
            pairs.push(PairTerm {
                coeff: align * t,
                modes: [i1, s2],
            });
            pairs.push(PairTerm {
                coeff: align * sample.r_prime_mag,
                modes: [s2, env],
            });
        }
        pairs
    }

    pub fn superposition_with<O: Transmission + ?Sized>(
        &self,
        obj: &O,
        phi_p: f64,
        convention: BranchConvention,
    ) -> Result<FockState> {
        let [g1, g2] = self.pair_amplitudes(phi_p);
        let vac = FockState::vacuum(self.n_max);
        let first = vac.apply_pairs(&self.crystal1_pairs(g1))?;
        let second = vac.apply_pairs(&self.crystal2_pairs(obj, g2, convention))?;
        Ok(vac.add(&first).add(&second))
    }

    /// Vacuum plus the first-order pair terms of both crystals, with the
    /// second crystal's idler rewritten through the object.
    pub fn build_superposition_state<O: Transmission + ?Sized>(
        &self,
        obj: &O,
        phi_p: f64,
    ) -> Result<FockState> {
        self.superposition_with(obj, phi_p, BranchConvention::Conjugate)
    }

    /// `(1 + X1)(1 + X2)|vac>` for the first-order pair operators `X1`, `X2`
    /// of the two crystals: the superposition state plus the `G1 G2` cross
    /// term, which double-occupies aligned idler modes.
    pub fn build_product_state<O: Transmission + ?Sized>(
        &self,
        obj: &O,
        phi_p: f64,
    ) -> Result<FockState> {
        if self.n_max < 2 {
            return Err(Error::InvalidConfig(
                "product state needs n_max >= 2".into(),
            ));
        }
        let [g1, g2] = self.pair_amplitudes(phi_p);
        let x1 = self.crystal1_pairs(g1);
        let x2 = self.crystal2_pairs(obj, g2, BranchConvention::Conjugate);
        let vac = FockState::vacuum(self.n_max);
        let with_second = vac.add(&vac.apply_pairs(&x2)?);
        Ok(with_second.add(&with_second.apply_pairs(&x1)?))
    }

    /// Phase of the second signal path relative to the first at grid entry
    /// `entry`. The beamsplitter's factor `i` and the propagation phases are
    /// folded into `delta_s0 + c0_prime`, matching the analytic engine.
    pub fn detector_phase(&self, entry: usize) -> Complex64 {
        let e = &self.grid.entries[entry];
        let tilt = self.cfg.tilt[0] * e.signal.qx + self.cfg.tilt[1] * e.signal.qy;
        Complex64::from_polar(1.0, self.cfg.delta_s0 + self.cfg.c0_prime + tilt)
    }

    /// Positive-frequency detector field at the pixel of grid entry `entry`
    /// applied to `state`.
    pub fn apply_detector_field(&self, state: &FockState, entry: usize) -> FockState {
        let s1 = self.registry.expect(ModeKind::Signal1, entry);
        let s2 = self.registry.expect(ModeKind::Signal2, entry);
        state
            .annihilate(s1)
            .add(&state.annihilate(s2).scale(self.detector_phase(entry)))
    }

    /// `<E^- E^+>` at the pixel, rescaled by `1 / g^2` so the background is
    /// `|V1|^2 + |V2|^2`.
    pub fn oracle_rate(&self, state: &FockState, entry: usize) -> f64 {
        let g = self.cfg.pair_scale;
        self.apply_detector_field(state, entry).norm_sqr() / (g * g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub g_values: Vec<f64>,
    pub relative_differences: Vec<f64>,
    pub exponent: f64,
}

/// `|R_product - R_superposition| / R_superposition` at grid entry `entry`
/// for each pair scale `g` (both crystals use the configured pump amplitudes).
pub fn product_vs_superposition<O: Transmission + ?Sized>(
    cfg: &OpticalConfig,
    obj: &O,
    grid: &ModeGrid,
    entry: usize,
    g_values: &[f64],
) -> Result<Vec<f64>> {
    g_values
        .iter()
        .map(|&g| {
            let mut c = cfg.clone();
            c.pair_scale = g;
            let oracle = FockOracle::new(grid, &c);
            let sup = oracle.build_superposition_state(obj, cfg.phi_p)?;
            let prod = oracle.build_product_state(obj, cfg.phi_p)?;
            let rs = oracle.oracle_rate(&sup, entry);
            let rp = oracle.oracle_rate(&prod, entry);
            Ok((rp - rs).abs() / rs)
        })
        .collect()
}

/// Log-log slope of the product-versus-superposition rate difference
/// against the pair scale.
pub fn pair_order_scaling_check<O: Transmission + ?Sized>(
    cfg: &OpticalConfig,
    obj: &O,
    grid: &ModeGrid,
    entry: usize,
    g_values: &[f64],
) -> Result<ScalingFit> {
    if g_values.len() < 2 {
        return Err(Error::InvalidConfig(
            "scaling fit needs at least two g values".into(),
        ));
    }
    let lo = g_values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = g_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo > 0.0) || hi > 1e-2 || hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(Error::InvalidConfig(format!(
            "g values must lie in (0, 1e-2] and span two decades, got [{lo}, {hi}]"
        )));
    }
    let diffs = product_vs_superposition(cfg, obj, grid, entry, g_values)?;
    if let Some(bad) = diffs.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
        return Err(Error::DegenerateFit(format!(
            "relative rate difference underflowed to {bad}"
        )));
    }
    let xs: Vec<f64> = g_values.iter().map(|g| g.ln()).collect();
    let ys: Vec<f64> = diffs.iter().map(|d| d.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(ScalingFit {
        g_values: g_values.to_vec(),
        relative_differences: diffs,
        exponent: sxy / sxx,
    })
}

/// Largest deviation between oracle and analytic rates over every grid
/// entry and every `phi_p`, relative to the background `|V1|^2 + |V2|^2`
/// (the rate itself can vanish on a dark fringe).
pub fn max_engine_deviation<O: Transmission + ?Sized>(
    cfg: &OpticalConfig,
    obj: &O,
    grid: &ModeGrid,
    phi_values: &[f64],
) -> Result<f64> {
    let [v1, v2] = cfg.pump_amplitudes;
    let background = v1 * v1 + v2 * v2;
    if background <= 0.0 {
        return Err(Error::InvalidConfig("both pump amplitudes are zero".into()));
    }
    let oracle = FockOracle::new(grid, cfg);
    let mut worst = 0.0f64;
    for &phi in phi_values {
        let state = oracle.build_superposition_state(obj, phi)?;
        for (k, entry) in grid.entries.iter().enumerate() {
            let analytic = counting_rate(entry, phi, obj, cfg);
            let dev = (oracle.oracle_rate(&state, k) - analytic).abs() / background;
            worst = worst.max(dev);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mode_space::{build_mode_grid, Camera};
    use crate::optics::UniformObject;
    use std::f64::consts::{FRAC_PI_3, PI, SQRT_2};

    fn single_mode(cfg: &OpticalConfig) -> ModeGrid {
        build_mode_grid(cfg, &Camera::new(1, 1, 1e-5).unwrap()).unwrap()
    }

    fn c64(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn ladder_operators() {
        let vac = FockState::vacuum(2);
        assert!(vac.annihilate(0).is_empty());
        let s = FockState::basis(&[(0, 1), (2, 1)], 2).unwrap();
        let out = s.annihilate(0);
        assert_eq!(out.amplitude(&[(2, 1)]), c64(1.0, 0.0));
        assert_eq!(out.len(), 1);
        let two = FockState::basis(&[(1, 2)], 2).unwrap();
        let out = two.annihilate(1);
        assert!((out.amplitude(&[(1, 1)]) - c64(SQRT_2, 0.0)).norm() < 1e-15);
        let up = FockState::basis(&[(1, 1)], 2).unwrap().create(1).unwrap();
        assert!((up.amplitude(&[(1, 2)]) - c64(SQRT_2, 0.0)).norm() < 1e-15);
        assert!(matches!(
            FockState::basis(&[(1, 2)], 2).unwrap().create(1),
            Err(Error::TruncationOverflow { .. })
        ));
    }

    #[test]
    fn registry_layout() {
        let c = OpticalConfig::default();
        let grid = build_mode_grid(&c, &Camera::new(3, 2, 1e-4).unwrap()).unwrap();
        let reg = ModeRegistry::for_grid(&grid, Envelope::Strict);
        assert_eq!(reg.len(), 24);
        for i in 0..reg.len() {
            let l = reg.label(i);
            assert_eq!(reg.index(l.kind, l.entry), Some(i));
        }
        assert_eq!(reg.index(ModeKind::Stray, 0), None);
        let reg = ModeRegistry::for_grid(&grid, Envelope::Sinc);
        assert_eq!(reg.len(), 30);
    }

    #[test]
    fn superposition_single_mode_amplitudes() {
        let c = OpticalConfig::default();
        let g = c.pair_scale;
        let grid = single_mode(&c);
        let oracle = FockOracle::new(&grid, &c);
        let reg = oracle.registry();
        let (s1, s2, i1, env) = (
            reg.index(ModeKind::Signal1, 0).unwrap(),
            reg.index(ModeKind::Signal2, 0).unwrap(),
            reg.index(ModeKind::Idler1, 0).unwrap(),
            reg.index(ModeKind::Environment, 0).unwrap(),
        );
        let psi = oracle
            .build_superposition_state(&UniformObject::transparent(), 0.0)
            .unwrap();
        assert_eq!(psi.len(), 3);
        assert_eq!(psi.amplitude(&[]), c64(1.0, 0.0));
        assert!((psi.amplitude(&[(s1, 1), (i1, 1)]) - c64(g, 0.0)).norm() < 1e-18);
        assert!((psi.amplitude(&[(i1, 1), (s2, 1)]) - c64(g, 0.0)).norm() < 1e-18);
        assert!(psi.terms().all(|(occ, _)| occupation_of(occ, env) == 0));

        let blocked = oracle
            .build_superposition_state(&UniformObject::opaque(), 0.0)
            .unwrap();
        for (occ, _) in blocked.terms() {
            if occupation_of(occ, i1) > 0 {
                assert_eq!(occupation_of(occ, s1), 1);
            }
        }
    }

    #[test]
    fn product_state_examples() {
        let c = OpticalConfig::default();
        let g = c.pair_scale;
        let grid = single_mode(&c);
        let oracle = FockOracle::new(&grid, &c);
        let reg = oracle.registry();
        let (s1, s2, i1) = (
            reg.index(ModeKind::Signal1, 0).unwrap(),
            reg.index(ModeKind::Signal2, 0).unwrap(),
            reg.index(ModeKind::Idler1, 0).unwrap(),
        );
        let t = c64(0.8, 0.0);
        let prod = oracle.build_product_state(&UniformObject(t), 0.0).unwrap();
        // a_I1^dagger twice on the vacuum gives sqrt(2)|2>.
        let cross = prod.amplitude(&[(s1, 1), (i1, 2), (s2, 1)]);
        assert!((cross - c64(SQRT_2 * g * g * 0.8, 0.0)).norm() < 1e-20);

        let clear = oracle
            .build_product_state(&UniformObject::transparent(), 0.0)
            .unwrap();
        let n2 = clear.norm_sqr();
        assert!((n2 - (1.0 + 2.0 * g * g)).abs() < 10.0 * g.powi(4));

        let mut off = c.clone();
        off.pump_amplitudes = [1.0, 0.0];
        let oracle = FockOracle::new(&grid, &off);
        let obj = UniformObject(c64(0.3, -0.4));
        assert_eq!(
            oracle.build_product_state(&obj, 0.4).unwrap(),
            oracle.build_superposition_state(&obj, 0.4).unwrap()
        );
        let tight = FockOracle::with_n_max(&grid, &c, 1);
        assert!(tight.build_product_state(&obj, 0.0).is_err());
        assert!(tight.build_superposition_state(&obj, 0.0).is_ok());
    }

    #[test]
    fn rate_examples() {
        let c = OpticalConfig::default();
        let grid = single_mode(&c);
        let oracle = FockOracle::new(&grid, &c);
        let clear = oracle
            .build_superposition_state(&UniformObject::transparent(), 0.0)
            .unwrap();
        let raw = oracle.apply_detector_field(&clear, 0).norm_sqr();
        assert!((raw - 4.0 * c.pair_scale.powi(2)).abs() < 1e-18);
        assert!((oracle.oracle_rate(&clear, 0) - 4.0).abs() < 1e-12);
        for phi in [0.0, 1.0, 4.0] {
            let blocked = oracle
                .build_superposition_state(&UniformObject::opaque(), phi)
                .unwrap();
            assert!((oracle.oracle_rate(&blocked, 0) - 2.0).abs() < 1e-12);
        }
        let t = Complex64::from_polar(0.7, 1.1);
        let obj = UniformObject(t);
        for phi in [0.0, 0.9, 2.0] {
            let a = oracle.build_superposition_state(&obj, phi).unwrap();
            let b = oracle.build_superposition_state(&obj, phi + PI).unwrap();
            let d = oracle.oracle_rate(&a, 0) - oracle.oracle_rate(&b, 0);
            let expected = 4.0 * t.norm() * (phi - t.arg()).cos();
            assert!((d - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn detector_reduces_photon_number_by_one() {
        let c = OpticalConfig::default();
        let grid = build_mode_grid(&c, &Camera::new(2, 2, 1e-4).unwrap()).unwrap();
        let oracle = FockOracle::new(&grid, &c);
        let obj = UniformObject(c64(0.5, 0.5));
        let prod = oracle.build_product_state(&obj, 0.3).unwrap();
        for entry in 0..4 {
            let out = oracle.apply_detector_field(&prod, entry);
            assert!(!out.is_empty());
            for (occ, _) in out.terms() {
                assert!(prod
                    .terms()
                    .any(|(o, _)| total_photons(o) == total_photons(occ) + 1));
                assert!(matches!(total_photons(occ), 1 | 3));
            }
        }
    }

    #[test]
    fn second_branch_weight_is_independent_of_object() {
        let c = OpticalConfig::default();
        let g = c.pair_scale;
        let grid = build_mode_grid(&c, &Camera::new(3, 3, 1e-4).unwrap()).unwrap();
        let oracle = FockOracle::new(&grid, &c);
        for t in [
            c64(1.0, 0.0),
            c64(0.0, 0.0),
            Complex64::from_polar(0.6, 2.0),
        ] {
            let psi = oracle
                .build_superposition_state(&UniformObject(t), 0.0)
                .unwrap();
            let weight: f64 = psi
                .terms()
                .filter(|(occ, _)| {
                    occ.iter()
                        .any(|&(m, _)| oracle.registry().label(m).kind == ModeKind::Signal2)
                })
                .map(|(_, a)| a.norm_sqr())
                .sum();
            assert!((weight - 9.0 * g * g).abs() < 1e-18);
        }
    }

    #[test]
    fn conjugation_convention_is_observable() {
        let mut c = OpticalConfig::default();
        c.delta_s0 = 0.2;
        let grid = single_mode(&c);
        let oracle = FockOracle::new(&grid, &c);
        let entry = &grid.entries[0];
        for (arg, invariant) in [(0.0, true), (FRAC_PI_3, false)] {
            let obj = UniformObject(Complex64::from_polar(0.9, arg));
            let right = oracle
                .superposition_with(&obj, 0.5, BranchConvention::Conjugate)
                .unwrap();
            let wrong = oracle
                .superposition_with(&obj, 0.5, BranchConvention::Direct)
                .unwrap();
            let analytic = counting_rate(entry, 0.5, &obj, &c);
            assert!((oracle.oracle_rate(&right, 0) - analytic).abs() < 1e-12);
            let same = (oracle.oracle_rate(&wrong, 0) - analytic).abs() < 1e-12;
            assert_eq!(same, invariant);
        }
    }

    #[test]
    fn sinc_mode_matches_analytic() {
        let mut c = OpticalConfig::default();
        c.envelope = Envelope::Sinc;
        c.crystal_dims = [2e-3, 2e-3, 2e-3];
        c.pump_amplitudes = [1.0, 0.6];
        let grid = build_mode_grid(&c, &Camera::new(5, 1, 2e-3).unwrap()).unwrap();
        assert!(grid.entries.iter().any(|e| e.weight < 0.5));
        let oracle = FockOracle::new(&grid, &c);
        let obj = UniformObject(Complex64::from_polar(0.8, -0.4));
        let psi = oracle.build_superposition_state(&obj, 1.3).unwrap();
        for (k, e) in grid.entries.iter().enumerate() {
            let a = counting_rate(e, 1.3, &obj, &c);
            assert!((oracle.oracle_rate(&psi, k) - a).abs() <= 1e-10 * a);
        }
    }

    #[test]
    fn scaling_check_examples() {
        let c = OpticalConfig::default();
        let grid = single_mode(&c);
        let gs = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2];
        for arg in [0.0, FRAC_PI_3] {
            let obj = UniformObject(Complex64::from_polar(1.0, arg));
            let fit = pair_order_scaling_check(&c, &obj, &grid, 0, &gs).unwrap();
            assert!((1.9..=2.1).contains(&fit.exponent), "{}", fit.exponent);
        }
        let mut off = c.clone();
        off.pump_amplitudes = [1.0, 0.0];
        let obj = UniformObject::transparent();
        let diffs = product_vs_superposition(&off, &obj, &grid, 0, &gs).unwrap();
        assert!(diffs.iter().all(|&d| d == 0.0));
        assert!(matches!(
            pair_order_scaling_check(&off, &obj, &grid, 0, &gs),
            Err(Error::DegenerateFit(_))
        ));
        assert!(pair_order_scaling_check(&c, &obj, &grid, 0, &[1e-3, 2e-3]).is_err());
        assert!(pair_order_scaling_check(&c, &obj, &grid, 0, &[1e-3, 1e-1]).is_err());
    }
}
