//! Atomic measures, interval partitions and ranked mass vectors.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{domain, Result};
use crate::rng::RngStream;
use crate::specialfn::{beta, log_gamma, uniform01};

/// Two locations closer than this are treated as the same point.
pub const LOCATION_TOL: f64 = 1e-15;

/// Tolerance on the total of a ranked vector.
pub const SUM_TOL: f64 = 1e-12;

/// A point mass `mass * delta(location)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

impl Atom {
    pub fn new(location: f64, mass: f64) -> Self {
        Self { location, mass }
    }
}

impl From<[f64; 2]> for Atom {
    fn from(v: [f64; 2]) -> Self {
        Atom::new(v[0], v[1])
    }
}

impl From<Atom> for [f64; 2] {
    fn from(a: Atom) -> Self {
        [a.location, a.mass]
    }
}

/// Anything carrying a finite list of positive masses.
pub trait MassSequence {
    fn mass_iter(&self) -> impl Iterator<Item = f64> + '_;
    /// Total mass, including any part not listed by `mass_iter`.
    fn total_mass(&self) -> f64;
    /// Mass included in `total_mass` but not listed by `mass_iter`.
    fn unlisted_mass(&self) -> f64 {
        0.0
    }
}

/// Mass `mass * PDRM(alpha, theta)` whose atoms have not been drawn yet.
///
/// The atoms are the sticks of a stick-breaking sequence at fresh uniform
/// locations. Breaking one stick leaves `(mass - piece) * PDRM(alpha, theta + alpha)`,
/// so the atoms can be drawn one at a time, when they are needed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dust {
    pub mass: f64,
    pub alpha: f64,
    pub theta: f64,
}

impl Dust {
    /// Breaks off the next stick and returns its mass.
    pub fn break_stick<R: rand::Rng + ?Sized>(&mut self, rng: &mut R) -> Result<f64> {
        let w = beta(1.0 - self.alpha, self.theta + self.alpha, rng)?;
        let piece = self.mass * w;
        self.mass *= 1.0 - w;
        self.theta += self.alpha;
        Ok(piece)
    }
}

/// A finite atomic measure on `[0, 1]` with distinct atom locations, plus
/// possibly some [`Dust`] whose atoms are not yet drawn.
///
/// Serialisation lists the drawn atoms only.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Atom>", into = "Vec<Atom>")]
pub struct AtomMeasure {
    atoms: Vec<Atom>,
    dust: Vec<Dust>,
    total_mass: f64,
}

impl AtomMeasure {
    /// The zero measure.
    pub fn zero() -> Self {
        Self::default()
    }

    /// Builds a measure, checking locations, masses and distinctness.
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        let m = Self::from_atoms_unchecked(atoms);
        m.validate()?;
        Ok(m)
    }

    /// Builds a measure from atoms known to satisfy the invariants.
    pub(crate) fn from_atoms_unchecked(atoms: Vec<Atom>) -> Self {
        Self::from_parts_unchecked(atoms, Vec::new())
    }

    pub(crate) fn from_parts_unchecked(atoms: Vec<Atom>, dust: Vec<Dust>) -> Self {
        let total_mass = atoms.iter().map(|a| a.mass).sum::<f64>() + dust.iter().map(|d| d.mass).sum::<f64>();
        Self { atoms, dust, total_mass }
    }

    /// Atoms plus undrawn dust.
    pub fn with_dust(atoms: Vec<Atom>, dust: Vec<Dust>) -> Result<Self> {
        let m = Self::from_parts_unchecked(atoms, dust);
        m.validate()?;
        Ok(m)
    }

    /// A single atom.
    pub fn dirac(location: f64, mass: f64) -> Result<Self> {
        Self::new(vec![Atom::new(location, mass)])
    }

    /// Checks every invariant of the type.
    pub fn validate(&self) -> Result<()> {
        for a in &self.atoms {
            if !(a.mass > 0.0 && a.mass.is_finite()) {
                return Err(domain(format!("atom mass {} is not positive and finite", a.mass)));
            }
            if !(0.0..=1.0).contains(&a.location) {
                return Err(domain(format!("atom location {} outside [0, 1]", a.location)));
            }
        }
        let mut locs: Vec<f64> = self.atoms.iter().map(|a| a.location).collect();
        locs.sort_unstable_by(f64::total_cmp);
        if let Some(w) = locs.windows(2).find(|w| w[1] - w[0] <= LOCATION_TOL) {
            return Err(domain(format!("atom locations {} and {} coincide", w[0], w[1])));
        }
        for d in &self.dust {
            if !(d.mass > 0.0 && d.mass.is_finite() && d.alpha > 0.0 && d.alpha < 1.0 && d.theta + d.alpha > 0.0) {
                return Err(domain(format!("invalid dust {d:?}")));
            }
        }
        let sum: f64 =
            self.atoms.iter().map(|a| a.mass).sum::<f64>() + self.dust.iter().map(|d| d.mass).sum::<f64>();
        if sum != self.total_mass {
            return Err(domain("cached total mass out of date"));
        }
        Ok(())
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn into_atoms(self) -> Vec<Atom> {
        self.atoms
    }

    pub fn dust(&self) -> &[Dust] {
        &self.dust
    }

    /// Mass not yet drawn as atoms.
    pub fn dust_mass(&self) -> f64 {
        self.dust.iter().fold(0.0, |acc, d| acc + d.mass)
    }

    pub(crate) fn into_parts(self) -> (Vec<Atom>, Vec<Dust>) {
        (self.atoms, self.dust)
    }

    fn refresh_total(&mut self) {
        self.total_mass =
            self.atoms.iter().map(|a| a.mass).sum::<f64>() + self.dust.iter().map(|d| d.mass).sum::<f64>();
    }

    /// Draws atoms out of the dust until every remaining piece has mass at most
    /// `max_remainder`, or `max_sticks` atoms were drawn from it.
    pub fn resolve(&mut self, max_remainder: f64, max_sticks: usize, rng: &mut RngStream) -> Result<()> {
        if self.dust.is_empty() {
            return Ok(());
        }
        let before = self.atoms.len();
        for d in &mut self.dust {
            let mut n = 0;
            while d.mass > max_remainder && n < max_sticks {
                let piece = d.break_stick(rng)?;
                if piece > 0.0 {
                    self.atoms.push(Atom::new(uniform01(rng), piece));
                }
                n += 1;
            }
        }
        self.dust.retain(|d| d.mass > 0.0);
        if self.atoms.len() > before {
            resolve_collisions(&mut self.atoms, rng);
        }
        self.refresh_total();
        Ok(())
    }

    /// Draws from the dust until no undrawn atom can exceed the largest drawn
    /// one, then returns the largest atom.
    pub fn resolve_largest(&mut self, rng: &mut RngStream) -> Result<Option<Atom>> {
        loop {
            let top = self.largest().map_or(0.0, |a| a.mass);
            let Some(d) = self.dust.iter_mut().find(|d| d.mass > top) else {
                self.refresh_total();
                return Ok(self.largest());
            };
            let piece = d.break_stick(rng)?;
            if piece > 0.0 {
                self.atoms.push(Atom::new(uniform01(rng), piece));
                resolve_collisions(&mut self.atoms, rng);
            }
            self.dust.retain(|d| d.mass > 0.0);
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    /// No atoms and no dust.
    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty() && self.dust.is_empty()
    }

    /// Mass of the atom sitting exactly at `location`, or zero.
    pub fn mass_at(&self, location: f64) -> f64 {
        self.atoms.iter().filter(|a| a.location == location).map(|a| a.mass).sum()
    }

    /// Largest atom; ties go to the smaller location.
    pub fn largest(&self) -> Option<Atom> {
        self.atoms.iter().copied().reduce(|best, a| {
            if a.mass > best.mass || (a.mass == best.mass && a.location < best.location) {
                a
            } else {
                best
            }
        })
    }

    /// The measure multiplied by `g > 0`.
    pub fn scaled(&self, g: f64) -> Result<Self> {
        if !(g > 0.0 && g.is_finite()) {
            return Err(domain(format!("scale factor {g} must be positive")));
        }
        Ok(Self::from_parts_unchecked(
            self.atoms.iter().map(|a| Atom::new(a.location, a.mass * g)).collect(),
            self.dust.iter().map(|d| Dust { mass: d.mass * g, ..*d }).collect(),
        ))
    }

    /// The measure divided by its total mass.
    pub fn normalized(&self) -> Result<Self> {
        if self.total_mass <= 0.0 {
            return Err(domain("cannot normalize the zero measure"));
        }
        let m = self.total_mass;
        let atoms = self.atoms.iter().map(|a| Atom::new(a.location, a.mass / m)).collect();
        let dust = self.dust.iter().map(|d| Dust { mass: d.mass / m, ..*d }).collect();
        Ok(Self::from_parts_unchecked(atoms, dust))
    }

    /// One `location,mass` row per atom.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("location,mass\n");
        for a in &self.atoms {
            let _ = writeln!(s, "{},{}", a.location, a.mass);
        }
        s
    }
}

impl TryFrom<Vec<Atom>> for AtomMeasure {
    type Error = crate::Error;
    fn try_from(atoms: Vec<Atom>) -> Result<Self> {
        Self::new(atoms)
    }
}

impl From<AtomMeasure> for Vec<Atom> {
    fn from(m: AtomMeasure) -> Self {
        m.atoms
    }
}

impl MassSequence for AtomMeasure {
    fn mass_iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.mass)
    }
    fn total_mass(&self) -> f64 {
        self.total_mass
    }
    fn unlisted_mass(&self) -> f64 {
        self.dust_mass()
    }
}

/// Gives atoms whose locations collide a fresh uniform location until all
/// locations are pairwise distinct. Returns the number of relocations.
pub fn resolve_collisions(atoms: &mut [Atom], rng: &mut RngStream) -> usize {
    let mut moved = 0;
    let mut order: Vec<u32> = Vec::new();
    loop {
        order.clear();
        order.extend(0..atoms.len() as u32);
        order.sort_unstable_by(|&i, &j| atoms[i as usize].location.total_cmp(&atoms[j as usize].location));
        let mut clean = true;
        for w in order.windows(2) {
            let (a, b) = (w[0] as usize, w[1] as usize);
            if atoms[b].location - atoms[a].location <= LOCATION_TOL {
                atoms[b].location = uniform01(rng);
                moved += 1;
                clean = false;
            }
        }
        if clean {
            return moved;
        }
    }
}

/// A finite interval partition stored as its ordered block masses.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct IntervalPartition {
    blocks: Vec<f64>,
    total_mass: f64,
}

impl IntervalPartition {
    /// The empty partition.
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(blocks: Vec<f64>) -> Result<Self> {
        if let Some(b) = blocks.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(domain(format!("block mass {b} is not positive and finite")));
        }
        Ok(Self::from_blocks_unchecked(blocks))
    }

    pub(crate) fn from_blocks_unchecked(blocks: Vec<f64>) -> Self {
        let total_mass = blocks.iter().sum();
        Self { blocks, total_mass }
    }

    pub fn blocks(&self) -> &[f64] {
        &self.blocks
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Block boundary points `0, c_1, c_1 + c_2, ...`.
    pub fn boundary_points(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.blocks.len() + 1);
        let mut acc = 0.0;
        out.push(acc);
        for b in &self.blocks {
            acc += b;
            out.push(acc);
        }
        out
    }

    /// One `index,mass` row per block.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,mass\n");
        for (i, b) in self.blocks.iter().enumerate() {
            let _ = writeln!(s, "{i},{b}");
        }
        s
    }
}

impl TryFrom<Vec<f64>> for IntervalPartition {
    type Error = crate::Error;
    fn try_from(blocks: Vec<f64>) -> Result<Self> {
        Self::new(blocks)
    }
}

impl From<IntervalPartition> for Vec<f64> {
    fn from(p: IntervalPartition) -> Self {
        p.blocks
    }
}

impl MassSequence for IntervalPartition {
    fn mass_iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.blocks.iter().copied()
    }
    fn total_mass(&self) -> f64 {
        self.total_mass
    }
}

/// Joins partitions left to right.
pub fn concatenate(parts: &[IntervalPartition]) -> IntervalPartition {
    let blocks = parts.iter().flat_map(|p| p.blocks.iter().copied()).collect();
    IntervalPartition::from_blocks_unchecked(blocks)
}

/// Multiplies every block by `g > 0`.
pub fn scale(g: f64, beta: &IntervalPartition) -> Result<IntervalPartition> {
    if !(g > 0.0 && g.is_finite()) {
        return Err(domain(format!("scale factor {g} must be positive")));
    }
    Ok(IntervalPartition::from_blocks_unchecked(beta.blocks.iter().map(|b| b * g).collect()))
}

/// Hausdorff distance between the boundary sets of two partitions.
pub fn hausdorff_distance(a: &IntervalPartition, b: &IntervalPartition) -> f64 {
    let pa = a.boundary_points();
    let pb = b.boundary_points();
    directed_distance(&pa, &pb).max(directed_distance(&pb, &pa))
}

/// `sup_{x in from} dist(x, to)` for sorted, non-empty point sets.
fn directed_distance(from: &[f64], to: &[f64]) -> f64 {
    let mut j = 0;
    let mut worst: f64 = 0.0;
    for &x in from {
        while j + 1 < to.len() && to[j + 1] <= x {
            j += 1;
        }
        let mut d = (x - to[j]).abs();
        if j + 1 < to.len() {
            d = d.min((to[j + 1] - x).abs());
        }
        worst = worst.max(d);
    }
    worst
}

/// A non-increasing finite sequence of nonnegative masses.
///
/// `defect` records mass known to be missing because of truncation, so that
/// `sum + defect` is the mass of the untruncated object.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RankedVector {
    entries: Vec<f64>,
    sum: f64,
    defect: f64,
}

impl RankedVector {
    /// Validates a point of the Kingman simplex given by its leading entries.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(domain("ranked entries must be finite and nonnegative"));
        }
        if entries.windows(2).any(|w| w[0] < w[1]) {
            return Err(domain("ranked entries must be non-increasing"));
        }
        let v = Self::from_sorted_unchecked(entries, 0.0);
        if v.sum > 1.0 + SUM_TOL {
            return Err(domain(format!("ranked entries sum to {} > 1", v.sum)));
        }
        Ok(v)
    }

    /// Sorts arbitrary nonnegative masses.
    pub fn from_masses(mut masses: Vec<f64>, defect: f64) -> Self {
        masses.sort_unstable_by(|a, b| b.total_cmp(a));
        Self::from_sorted_unchecked(masses, defect)
    }

    pub(crate) fn from_sorted_unchecked(entries: Vec<f64>, defect: f64) -> Self {
        let sum = entries.iter().sum();
        Self { entries, sum, defect }
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn sum(&self) -> f64 {
        self.sum
    }

    pub fn defect(&self) -> f64 {
        self.defect
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn largest(&self) -> f64 {
        self.entries.first().copied().unwrap_or(0.0)
    }

    /// Number of entries strictly above `h`.
    pub fn count_above(&self, h: f64) -> usize {
        self.entries.partition_point(|&x| x > h)
    }

    /// The measure placing entry `i` (1-based) at location `1/i`.
    pub fn to_measure(&self) -> AtomMeasure {
        let atoms = self
            .entries
            .iter()
            .enumerate()
            .filter(|(_, &x)| x > 0.0)
            .map(|(i, &x)| Atom::new(1.0 / (i + 1) as f64, x))
            .collect();
        AtomMeasure::from_atoms_unchecked(atoms)
    }

    /// One `rank,mass` row per entry.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("rank,mass\n");
        for (i, x) in self.entries.iter().enumerate() {
            let _ = writeln!(s, "{},{}", i + 1, x);
        }
        s
    }
}

impl TryFrom<Vec<f64>> for RankedVector {
    type Error = crate::Error;
    fn try_from(entries: Vec<f64>) -> Result<Self> {
        Self::new(entries)
    }
}

impl From<RankedVector> for Vec<f64> {
    fn from(v: RankedVector) -> Self {
        v.entries
    }
}

impl MassSequence for RankedVector {
    fn mass_iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().copied()
    }
    fn total_mass(&self) -> f64 {
        self.sum
    }
}

impl MassSequence for [f64] {
    fn mass_iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.iter().copied()
    }
    fn total_mass(&self) -> f64 {
        self.iter().sum()
    }
}

/// Ranked masses of `input`, divided by the total mass if `normalize`.
/// Mass that is not listed (undrawn dust) becomes the defect.
pub fn ranked<T: MassSequence + ?Sized>(input: &T, normalize: bool) -> Result<RankedVector> {
    let total = input.total_mass();
    let scale = if normalize {
        if total <= 0.0 {
            return Err(domain("cannot normalize an input with zero total mass"));
        }
        1.0 / total
    } else {
        1.0
    };
    let masses: Vec<f64> = input.mass_iter().map(|m| m * scale).collect();
    Ok(RankedVector::from_masses(masses, input.unlisted_mass() * scale))
}

/// `Gamma(1 - alpha) h^alpha #{i : x_i > h}` for each `h` in a decreasing grid.
pub fn diversity_estimate(x: &RankedVector, alpha: f64, h_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if x.is_empty() {
        return Err(domain("diversity of an empty vector"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain(format!("alpha = {alpha} outside (0, 1)")));
    }
    if h_grid.iter().any(|h| !(*h > 0.0)) || h_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(domain("h grid must be positive and strictly decreasing"));
    }
    let gamma = log_gamma(1.0 - alpha)?.0.exp();
    Ok(h_grid
        .iter()
        .map(|&h| (h, gamma * h.powf(alpha) * x.count_above(h) as f64))
        .collect())
}
