//! The gluing construction: stacking compatible blocks with disjoint spectra
//! into one pair on the product chart, and the pointwise splitting metric
//! that undoes it.
//!
//! For blocks (h_i, L_i) the glued pair is L = diag(L_1, ..., L_k) and
//! g block i = h_i * prod_{j != i} chi_j(L_i), with chi_j the monic
//! characteristic polynomial det(t I - L_j) evaluated at the other block's
//! coordinates. Splitting inverts this at a point through the metric
//! h(u, v) = g(chihat(L)^{-1} u, v) with chihat = sum_i chi/chi_i.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fields::{Chart, EndoField, MetricField};
use crate::jets::{RJet, MAX_DIM};
use crate::linalg::{
    matrix_function_targets, polish_cluster, poly_roots, spectral_cluster, ClusterKind,
    ClusterTargets, Poly, SmallMatrix,
};
use crate::normalforms::{NormalFormSpec, Scene};
use crate::{Error, Result};

/// Points sampled per block chart when checking that the spectrum stays in
/// its declared region.
const REGION_SAMPLES: usize = 32;
const REGION_SEED: u64 = 0x5eed_b10c;

/// Conjugation-symmetric box in the complex plane: a range for the real part
/// and a range for |imaginary part|. Real-matrix spectra are conjugation
/// symmetric, so this is the natural shape for a declared eigenvalue region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralRegion {
    pub re: [f64; 2],
    pub im_abs: [f64; 2],
}

impl SpectralRegion {
    pub fn new(re: [f64; 2], im_abs: [f64; 2]) -> Self {
        assert!(re[0] <= re[1] && 0.0 <= im_abs[0] && im_abs[0] <= im_abs[1]);
        SpectralRegion { re, im_abs }
    }

    /// Region for a block with real spectrum in [lo, hi].
    pub fn real_interval(lo: f64, hi: f64) -> Self {
        SpectralRegion::new([lo, hi], [0.0, 1e-9 * (1.0 + lo.abs().max(hi.abs()))])
    }

    pub fn contains(&self, z: Complex64) -> bool {
        let im = z.im.abs();
        self.re[0] <= z.re && z.re <= self.re[1] && self.im_abs[0] <= im && im <= self.im_abs[1]
    }

    pub fn is_disjoint_from(&self, other: &SpectralRegion) -> bool {
        let re_apart = self.re[1] < other.re[0] || other.re[1] < self.re[0];
        let im_apart =
            self.im_abs[1] < other.im_abs[0] || other.im_abs[1] < self.im_abs[0];
        re_apart || im_apart
    }

    /// Smallest region containing both operands.
    pub fn hull(&self, other: &SpectralRegion) -> SpectralRegion {
        SpectralRegion {
            re: [self.re[0].min(other.re[0]), self.re[1].max(other.re[1])],
            im_abs: [
                self.im_abs[0].min(other.im_abs[0]),
                self.im_abs[1].max(other.im_abs[1]),
            ],
        }
    }
}

/// Bounding region of the sampled spectrum of `l` over the chart, inflated by
/// a small relative pad. Deterministic for fixed inputs.
pub fn estimate_region(l: &EndoField, chart: &Chart, n_points: usize, seed: u64) -> Result<SpectralRegion> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = chart.sample_points(n_points, &mut rng)?.points;
    // Interior sampling systematically undershoots spectra whose extremes sit
    // at the corners of the box (every eigenvalue function in this crate is
    // monotone per coordinate), so walk the corners too, inset just enough to
    // stay clear of the exclusion margins.
    let dim = chart.dim();
    if dim <= 6 {
        let inset = chart.margin().max(1e-6);
        for mask in 0..(1u32 << dim) {
            let p: Vec<f64> = chart
                .bounds()
                .iter()
                .enumerate()
                .map(|(k, b)| {
                    let w = b[1] - b[0];
                    if mask & (1 << k) != 0 {
                        b[1] - inset * w
                    } else {
                        b[0] + inset * w
                    }
                })
                .collect();
            if chart.check(&p).is_ok() {
                points.push(p);
            }
        }
    }
    let mut re = [f64::INFINITY, f64::NEG_INFINITY];
    let mut im_abs = [f64::INFINITY, f64::NEG_INFINITY];
    for p in &points {
        let a = l.eval_raw(p).values();
        let roots = poly_roots(&a.char_poly().to_complex(), 1e-13)?;
        for cl in spectral_cluster(&roots, 1e-9) {
            re[0] = re[0].min(cl.value.re);
            re[1] = re[1].max(cl.value.re);
            let im = cl.value.im.abs();
            im_abs[0] = im_abs[0].min(im);
            im_abs[1] = im_abs[1].max(im);
        }
    }
    let scale = 1.0 + re[0].abs().max(re[1].abs()).max(im_abs[1]);
    let pad = 0.02 * ((re[1] - re[0]) + (im_abs[1] - im_abs[0])) + 1e-7 * scale;
    Ok(SpectralRegion {
        re: [re[0] - pad, re[1] + pad],
        im_abs: [(im_abs[0] - pad).max(0.0), im_abs[1] + pad],
    })
}

/// One glue input: a compatible pair on its own chart plus the declared
/// region its eigenvalues stay in.
#[derive(Clone, Debug)]
pub struct Block {
    pub h: MetricField,
    pub l: EndoField,
    pub chart: Chart,
    pub region: SpectralRegion,
}

impl Block {
    pub fn new(h: MetricField, l: EndoField, chart: Chart, region: SpectralRegion) -> Result<Self> {
        if h.dim() != l.dim() || h.dim() != chart.dim() {
            return Err(Error::Schema(format!(
                "block dimensions disagree: h {}, L {}, chart {}",
                h.dim(),
                l.dim(),
                chart.dim()
            )));
        }
        Ok(Block { h, l, chart, region })
    }

    /// Wrap a scene as a glue input, estimating the spectral region by
    /// sampling.
    pub fn from_scene(scene: &Scene) -> Result<Self> {
        let l = scene.l_field();
        let region = estimate_region(&l, &scene.chart, 64, REGION_SEED)?;
        Block::new(scene.g.clone(), l, scene.chart.clone(), region)
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    /// Characteristic polynomial of L at a point of this block's own chart,
    /// coefficients carrying their coordinate gradients.
    pub fn chi_at(&self, p: &[f64]) -> Poly<RJet> {
        self.l.eval_raw(p).char_poly()
    }

    /// Repackage as a scene (the block invariant is exactly that (h, L) is a
    /// compatible pair on the chart).
    pub fn into_scene(self, name: String) -> Scene {
        Scene {
            name,
            chart: self.chart,
            g: self.h,
            l: Some(self.l),
            gbar: None,
        }
    }
}

/// Concatenate block charts into the product chart, lifting each block's
/// exclusions to the matching coordinate slice.
fn product_chart(blocks: &[Block], offsets: &[usize]) -> Chart {
    let mut bounds = Vec::new();
    let mut margin = f64::INFINITY;
    for b in blocks {
        bounds.extend_from_slice(b.chart.bounds());
        margin = margin.min(b.chart.margin());
    }
    let mut chart = Chart::new(&bounds).with_margin(margin);
    for (i, b) in blocks.iter().enumerate() {
        let (off, dim) = (offsets[i], b.dim());
        for ex in b.chart.exclusions() {
            let ex = ex.clone();
            let name = format!("b{i}.{}", ex.name());
            chart = chart.with_exclusion(&name, move |p| ex.value(&p[off..off + dim]));
        }
    }
    chart
}

/// Check by sampling that every eigenvalue of each block stays inside its
/// declared region.
fn check_spectra_in_regions(blocks: &[Block]) -> Result<()> {
    for (i, b) in blocks.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(REGION_SEED ^ (i as u64 + 1));
        let sampling = b.chart.sample_points(REGION_SAMPLES, &mut rng)?;
        for p in &sampling.points {
            let a = b.l.eval_raw(p).values();
            let roots = poly_roots(&a.char_poly().to_complex(), 1e-13)?;
            for cl in spectral_cluster(&roots, 1e-9) {
                if !b.region.contains(cl.value) {
                    return Err(Error::SpectrumEscapesRegion {
                        block: i,
                        re: cl.value.re,
                        im: cl.value.im,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Glue an ordered list of blocks into one block on the product chart.
pub fn glue(blocks: &[Block]) -> Result<Block> {
    if blocks.is_empty() {
        return Err(Error::Schema("glue needs at least one block".into()));
    }
    let mut offsets = Vec::with_capacity(blocks.len());
    let mut total = 0usize;
    for b in blocks {
        offsets.push(total);
        total += b.dim();
    }
    if total > MAX_DIM {
        return Err(Error::DimensionOverflow(total));
    }
    for i in 0..blocks.len() {
        for j in i + 1..blocks.len() {
            if !blocks[i].region.is_disjoint_from(&blocks[j].region) {
                return Err(Error::SpectralOverlap(i, j));
            }
        }
    }
    check_spectra_in_regions(blocks)?;

    let chart = product_chart(blocks, &offsets);
    let region = blocks
        .iter()
        .skip(1)
        .fold(blocks[0].region, |acc, b| acc.hull(&b.region));

    let parts: Vec<(MetricField, EndoField, usize, usize)> = blocks
        .iter()
        .zip(&offsets)
        .map(|(b, &off)| (b.h.clone(), b.l.clone(), off, b.dim()))
        .collect();

    let lift = parts.clone();
    let l_glued = EndoField::new(total, move |p| {
        let mut m = SmallMatrix::zeros(total);
        for (_, l, off, dim) in &lift {
            let block = l.eval_raw(&p[*off..*off + *dim]);
            for r in 0..*dim {
                for c in 0..*dim {
                    m.set(off + r, off + c, block.at(r, c).embed(total, *off));
                }
            }
        }
        m
    });

    let lift = parts.clone();
    let g_glued = MetricField::new(total, move |p| {
        // per block: L and chi with gradients re-indexed into the product chart
        let mut l_emb = Vec::with_capacity(lift.len());
        let mut chi_emb = Vec::with_capacity(lift.len());
        let mut h_emb = Vec::with_capacity(lift.len());
        for (h, l, off, dim) in &lift {
            let slice = &p[*off..*off + *dim];
            let lm = l.eval_raw(slice).map(|e| e.embed(total, *off));
            chi_emb.push(lm.char_poly());
            l_emb.push(lm);
            h_emb.push(h.eval_raw(slice).map(|e| e.embed(total, *off)));
        }
        let mut m = SmallMatrix::zeros(total);
        for i in 0..lift.len() {
            let mut factor = SmallMatrix::identity(lift[i].3);
            for (j, chi) in chi_emb.iter().enumerate() {
                if j != i {
                    factor = factor.mul(&chi.eval_matrix(&l_emb[i]));
                }
            }
            let block = h_emb[i].mul(&factor).symmetrize();
            let off = lift[i].2;
            for r in 0..lift[i].3 {
                for c in 0..lift[i].3 {
                    m.set(off + r, off + c, block.at(r, c));
                }
            }
        }
        m
    });

    Block::new(g_glued, l_glued, chart, region)
}

/// One factor of a pointwise split: the eigenvalue cluster, its factor of the
/// characteristic polynomial, the spectral projector onto its generalized
/// eigenspace, and the splitting metric restricted there (full-size matrix,
/// supported on the subspace).
#[derive(Clone, Debug)]
pub struct SplitBlock {
    pub center: Complex64,
    pub kind: ClusterKind,
    /// Subspace dimension: multiplicity, doubled for conjugate pairs.
    pub weight: usize,
    pub chi: Poly<f64>,
    pub projector: SmallMatrix<f64>,
    pub h_block: SmallMatrix<f64>,
}

/// Result of splitting (g, L) at one point.
#[derive(Clone, Debug)]
pub struct SplitReport {
    /// The splitting metric h(u, v) = g(chihat(L)^{-1} u, v).
    pub h: SmallMatrix<f64>,
    pub blocks: Vec<SplitBlock>,
    /// max |(P_i^T h P_j)_{rc}| over distinct cluster pairs; the splitting
    /// theorem says this vanishes.
    pub cross_max: f64,
}

fn cluster_label(z: Complex64) -> String {
    format!("{:.6e}{:+.6e}i", z.re, z.im)
}

/// Minimal distance between the root sets of two clusters (conjugate members
/// included).
fn cluster_separation(a: Complex64, ka: ClusterKind, b: Complex64, kb: ClusterKind) -> f64 {
    let reps = |z: Complex64, k: ClusterKind| match k {
        ClusterKind::Real => vec![z],
        ClusterKind::ConjugatePair => vec![z, z.conj()],
    };
    let mut sep = f64::INFINITY;
    for za in reps(a, ka) {
        for zb in reps(b, kb) {
            sep = sep.min((za - zb).norm());
        }
    }
    sep
}

/// Split (g, L) at the point p: cluster the eigenvalues of L(p), form the
/// per-cluster factors chi_i of the characteristic polynomial and
/// chihat = sum_i chi/chi_i, and return h(u, v) = g(chihat(L)^{-1} u, v)
/// together with the spectral projectors and the restrictions of h.
pub fn split_pointwise(
    g: &MetricField,
    l: &EndoField,
    p: &[f64],
    tol: f64,
) -> Result<SplitReport> {
    let a = l.eval_raw(p).values();
    let gm = g.eval_raw(p).values();
    let chi_total = a.char_poly().to_complex();
    let roots = poly_roots(&chi_total, 1e-13)?;
    let mut clusters = spectral_cluster(&roots, tol);
    for cl in clusters.iter_mut() {
        cl.value = polish_cluster(&chi_total, cl.value, cl.mult);
        if cl.kind == ClusterKind::Real {
            cl.value.im = 0.0;
        }
    }

    for i in 0..clusters.len() {
        for j in i + 1..clusters.len() {
            let sep = cluster_separation(
                clusters[i].value,
                clusters[i].kind,
                clusters[j].value,
                clusters[j].kind,
            );
            if sep <= 10.0 * tol {
                return Err(Error::ClusterCollision {
                    a: cluster_label(clusters[i].value),
                    b: cluster_label(clusters[j].value),
                    sep,
                    tol,
                });
            }
        }
    }

    // chi_i: (t - c)^m for real clusters, ((t - z)(t - conj z))^m for pairs
    let chi_parts: Vec<Poly<f64>> = clusters
        .iter()
        .map(|cl| {
            let base = match cl.kind {
                ClusterKind::Real => Poly::linear_root(cl.value.re),
                ClusterKind::ConjugatePair => {
                    Poly::new(vec![cl.value.norm_sqr(), -2.0 * cl.value.re, 1.0])
                }
            };
            let mut acc = Poly::constant(1.0);
            for _ in 0..cl.mult {
                acc = acc.mul(&base);
            }
            acc
        })
        .collect();

    let mut chihat = Poly::constant(0.0);
    for i in 0..chi_parts.len() {
        let mut hat_i = Poly::constant(1.0);
        for (j, part) in chi_parts.iter().enumerate() {
            if j != i {
                hat_i = hat_i.mul(part);
            }
        }
        chihat = chihat.add(&hat_i);
    }

    let m = chihat.eval_matrix(&a);
    let m_inv = m.inverse()?;
    let h = m_inv.transpose().mul(&gm).symmetrize();

    let indicator_targets = |active: usize| -> Vec<ClusterTargets> {
        clusters
            .iter()
            .enumerate()
            .map(|(i, cl)| {
                let mut derivs = vec![Complex64::new(0.0, 0.0); cl.mult];
                if i == active {
                    derivs[0] = Complex64::new(1.0, 0.0);
                }
                ClusterTargets {
                    value: cl.value,
                    mult: cl.mult,
                    kind: cl.kind,
                    derivs,
                }
            })
            .collect()
    };

    let mut blocks = Vec::with_capacity(clusters.len());
    for (i, cl) in clusters.iter().enumerate() {
        let projector = matrix_function_targets(&a, &indicator_targets(i), 1e-8)?;
        let h_block = projector.transpose().mul(&h).mul(&projector);
        let weight = match cl.kind {
            ClusterKind::Real => cl.mult,
            ClusterKind::ConjugatePair => 2 * cl.mult,
        };
        blocks.push(SplitBlock {
            center: cl.value,
            kind: cl.kind,
            weight,
            chi: chi_parts[i].clone(),
            projector,
            h_block,
        });
    }

    let mut cross_max = 0.0f64;
    for i in 0..blocks.len() {
        for j in 0..blocks.len() {
            if i != j {
                let cross = blocks[i]
                    .projector
                    .transpose()
                    .mul(&h)
                    .mul(&blocks[j].projector);
                cross_max = cross_max.max(cross.max_abs());
            }
        }
    }

    Ok(SplitReport {
        h,
        blocks,
        cross_max,
    })
}

/// Serializable glue request: a list of constructions to glue in order, each
/// either a normal form or a nested glue.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GlueSpec {
    pub blocks: Vec<BlockSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BlockSpec {
    Glue(GlueSpec),
    Form(NormalFormSpec),
}

impl BlockSpec {
    pub fn build_named(&self) -> Result<(Block, String)> {
        match self {
            BlockSpec::Form(spec) => {
                let scene = spec.build()?;
                let name = scene.name.clone();
                Ok((Block::from_scene(&scene)?, name))
            }
            BlockSpec::Glue(spec) => spec.build_named(),
        }
    }
}

impl GlueSpec {
    fn build_named(&self) -> Result<(Block, String)> {
        let mut blocks = Vec::with_capacity(self.blocks.len());
        let mut names = Vec::with_capacity(self.blocks.len());
        for spec in &self.blocks {
            let (block, name) = spec.build_named()?;
            blocks.push(block);
            names.push(name);
        }
        let glued = glue(&blocks)?;
        Ok((glued, format!("glue({})", names.join("+"))))
    }

    pub fn build(&self) -> Result<Scene> {
        let (block, name) = self.build_named()?;
        Ok(block.into_scene(name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ParamFn;
    use crate::normalforms::{dini_pair, levicivita3_pair};

    /// 1-D block with constant metric (sign) and eigenvalue function f.
    fn one_d_block(sign: f64, f: ParamFn, interval: [f64; 2]) -> Block {
        let chart = Chart::new(&[interval]);
        let h = MetricField::new(1, move |_| {
            let mut m = SmallMatrix::zeros(1);
            m.set(0, 0, RJet::constant(sign));
            m
        });
        let ff = f.clone();
        let l = EndoField::new(1, move |p| {
            let c = RJet::seed_point(p);
            let mut m = SmallMatrix::zeros(1);
            m.set(0, 0, ff.eval_real(&c));
            m
        });
        let region = estimate_region(&l, &chart, 32, 11).unwrap();
        Block::new(h, l, chart, region).unwrap()
    }

    fn x_block() -> Block {
        one_d_block(1.0, ParamFn::real(0, &[1.0, 0.1]), [-0.5, 0.5])
    }

    fn y_block() -> Block {
        one_d_block(-1.0, ParamFn::real(0, &[2.0, 0.1]), [-0.5, 0.5])
    }

    fn z_block() -> Block {
        one_d_block(1.0, ParamFn::real(0, &[4.0, 0.1]), [-0.5, 0.5])
    }

    #[test]
    fn two_blocks_glue_to_the_negated_diagonal_pair() {
        // the glued g is h_i * chi_j(L_i) with monic chi, which lands on the
        // negative of the 2-D diagonal family's g; L matches exactly
        let glued = glue(&[x_block(), y_block()]).unwrap();
        let x = ParamFn::real(0, &[1.0, 0.1]);
        let y = ParamFn::real(1, &[2.0, 0.1]);
        let reference = dini_pair(&x, &y, Chart::new(&[[-0.5, 0.5], [-0.5, 0.5]])).unwrap();
        for p in [[0.0, 0.0], [0.3, -0.2], [-0.5, 0.5]] {
            let a = glued.h.eval_raw(&p);
            let b = reference.g.eval_raw(&p);
            for i in 0..2 {
                for j in 0..2 {
                    assert!(
                        (a.at(i, j).value() + b.at(i, j).value()).abs() <= 1e-15,
                        "g mismatch at {p:?} ({i},{j})"
                    );
                }
            }
            let la = glued.l.eval_raw(&p);
            let lb = reference.l.as_ref().unwrap().eval_raw(&p);
            for i in 0..2 {
                for j in 0..2 {
                    assert_eq!(la.at(i, j).value(), lb.at(i, j).value());
                }
            }
        }
    }

    #[test]
    fn glued_gradients_see_the_other_block() {
        // g_11 = X(x) - Y(y): d/dx = X' = 0.1, d/dy = -Y' = -0.1
        let glued = glue(&[x_block(), y_block()]).unwrap();
        let g = glued.h.eval_raw(&[0.2, -0.1]);
        assert!((g.at(0, 0).partial(0) - 0.1).abs() <= 1e-15);
        assert!((g.at(0, 0).partial(1) + 0.1).abs() <= 1e-15);
        assert!((g.at(1, 1).partial(0) - 0.1).abs() <= 1e-15);
        assert!((g.at(1, 1).partial(1) + 0.1).abs() <= 1e-15);
    }

    #[test]
    fn three_blocks_reproduce_the_3d_diagonal_family() {
        let glued = glue(&[x_block(), y_block(), z_block()]).unwrap();
        let x = ParamFn::real(0, &[1.0, 0.1]);
        let y = ParamFn::real(1, &[2.0, 0.1]);
        let z = ParamFn::real(2, &[4.0, 0.1]);
        let chart = Chart::new(&[[-0.5, 0.5], [-0.5, 0.5], [-0.5, 0.5]]);
        let reference = levicivita3_pair(&x, &y, &z, chart).unwrap();
        for p in [[0.0, 0.0, 0.0], [0.3, -0.2, 0.4], [-0.5, 0.5, -0.1]] {
            let a = glued.h.eval_raw(&p);
            let b = reference.g.eval_raw(&p);
            for i in 0..3 {
                for j in 0..3 {
                    assert!(
                        (a.at(i, j).value() - b.at(i, j).value()).abs() <= 1e-13,
                        "g mismatch at {p:?} ({i},{j}): {} vs {}",
                        a.at(i, j).value(),
                        b.at(i, j).value()
                    );
                }
            }
        }
    }

    #[test]
    fn glue_is_associative() {
        let (a, b, c) = (x_block(), y_block(), z_block());
        let left = glue(&[glue(&[a.clone(), b.clone()]).unwrap(), c.clone()]).unwrap();
        let right = glue(&[a.clone(), glue(&[b.clone(), c.clone()]).unwrap()]).unwrap();
        let flat = glue(&[a, b, c]).unwrap();
        for p in [[0.0, 0.0, 0.0], [0.25, -0.4, 0.1], [-0.3, 0.3, 0.45]] {
            let gl = left.h.eval_raw(&p);
            let gr = right.h.eval_raw(&p);
            let gf = flat.h.eval_raw(&p);
            for i in 0..3 {
                for j in 0..3 {
                    let scale = 1.0 + gf.at(i, j).value().abs();
                    assert!(
                        (gl.at(i, j).value() - gf.at(i, j).value()).abs() <= 1e-12 * scale,
                        "left-assoc mismatch at {p:?} ({i},{j})"
                    );
                    assert!(
                        (gr.at(i, j).value() - gf.at(i, j).value()).abs() <= 1e-12 * scale,
                        "right-assoc mismatch at {p:?} ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn glue_commutes_up_to_the_coordinate_swap() {
        let ab = glue(&[x_block(), y_block()]).unwrap();
        let ba = glue(&[y_block(), x_block()]).unwrap();
        for p in [[0.1, -0.3], [0.45, 0.2]] {
            let swapped = [p[1], p[0]];
            let g1 = ab.h.eval_raw(&p);
            let g2 = ba.h.eval_raw(&swapped);
            // block A of ab is block 2 of ba; the permuted entries and the
            // computation sequence coincide, so equality is exact
            assert_eq!(g1.at(0, 0).value(), g2.at(1, 1).value());
            assert_eq!(g1.at(1, 1).value(), g2.at(0, 0).value());
            assert_eq!(g1.at(0, 0).partial(0), g2.at(1, 1).partial(1));
            assert_eq!(g1.at(1, 1).partial(1), g2.at(0, 0).partial(0));
            let l1 = ab.l.eval_raw(&p);
            let l2 = ba.l.eval_raw(&swapped);
            assert_eq!(l1.at(0, 0).value(), l2.at(1, 1).value());
            assert_eq!(l1.at(1, 1).value(), l2.at(0, 0).value());
        }
    }

    #[test]
    fn overlapping_regions_are_rejected() {
        let a = one_d_block(1.0, ParamFn::real(0, &[1.0, 0.1]), [-0.5, 0.5]);
        let b = one_d_block(-1.0, ParamFn::real(0, &[1.02, 0.1]), [-0.5, 0.5]);
        match glue(&[a, b]) {
            Err(Error::SpectralOverlap(0, 1)) => {}
            other => panic!("expected spectral overlap, got {other:?}"),
        }
    }

    #[test]
    fn escaped_spectrum_is_reported() {
        let mut b = x_block();
        b.region = SpectralRegion::real_interval(3.0, 4.0);
        match glue(&[b, y_block()]) {
            Err(Error::SpectrumEscapesRegion { block: 0, .. }) => {}
            other => panic!("expected spectrum escape, got {other:?}"),
        }
    }

    #[test]
    fn dimension_overflow_is_rejected() {
        let blocks: Vec<Block> = (0..9)
            .map(|k| {
                one_d_block(
                    1.0,
                    ParamFn::real(0, &[2.0 * k as f64, 0.1]),
                    [-0.5, 0.5],
                )
            })
            .collect();
        match glue(&blocks) {
            Err(Error::DimensionOverflow(9)) => {}
            other => panic!("expected dimension overflow, got {other:?}"),
        }
    }

    #[test]
    fn split_recovers_the_pre_glue_blocks() {
        let glued = glue(&[x_block(), y_block()]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let points = glued.chart.sample_points(20, &mut rng).unwrap().points;
        for p in &points {
            let report = split_pointwise(&glued.h, &glued.l, p, 1e-7).unwrap();
            assert_eq!(report.blocks.len(), 2);
            assert!(report.cross_max <= 1e-12, "cross terms at {p:?}");
            // clusters sort by real part: X < Y, so block order matches
            assert!((report.h.at(0, 0) - 1.0).abs() <= 1e-10);
            assert!((report.h.at(1, 1) + 1.0).abs() <= 1e-10);
            assert!(report.h.at(0, 1).abs() <= 1e-12);
            let p0 = &report.blocks[0].projector;
            assert!((p0.at(0, 0) - 1.0).abs() <= 1e-10);
            assert!(p0.at(1, 1).abs() <= 1e-10);
        }
    }

    #[test]
    fn split_with_one_cluster_returns_g_unchanged() {
        // constant Jordan block: single eigenvalue, chihat = 1, h = g
        let h = MetricField::new(2, |_| {
            let mut m = SmallMatrix::zeros(2);
            m.set(0, 0, RJet::constant(0.0));
            m.set(0, 1, RJet::constant(1.0));
            m.set(1, 0, RJet::constant(1.0));
            m.set(1, 1, RJet::constant(0.3));
            m
        });
        let l = EndoField::new(2, |_| {
            let mut m = SmallMatrix::zeros(2);
            m.set(0, 0, RJet::constant(2.0));
            m.set(0, 1, RJet::constant(1.0));
            m.set(1, 1, RJet::constant(2.0));
            m
        });
        let report = split_pointwise(&h, &l, &[0.0, 0.0], 1e-7).unwrap();
        assert_eq!(report.blocks.len(), 1);
        assert_eq!(report.blocks[0].weight, 2);
        assert!((report.h.at(0, 1) - 1.0).abs() <= 1e-12);
        assert!((report.h.at(1, 1) - 0.3).abs() <= 1e-12);
        assert!(report.h.at(0, 0).abs() <= 1e-12);
        let pr = &report.blocks[0].projector;
        assert!((pr.at(0, 0) - 1.0).abs() <= 1e-12);
        assert!((pr.at(1, 1) - 1.0).abs() <= 1e-12);
        assert!(pr.at(0, 1).abs() <= 1e-12);
    }

    #[test]
    fn split_separates_a_complex_pair_from_a_real_block() {
        // constant rotation block (eigenvalues a +- ib) glued with a real
        // 1-D block far away
        let rot = {
            let chart = Chart::new(&[[-0.5, 0.5], [-0.5, 0.5]]);
            let h = MetricField::new(2, |_| {
                let mut m = SmallMatrix::zeros(2);
                m.set(0, 0, RJet::constant(1.3));
                m.set(1, 1, RJet::constant(-1.3));
                m
            });
            let l = EndoField::new(2, |_| {
                let mut m = SmallMatrix::zeros(2);
                m.set(0, 0, RJet::constant(0.4));
                m.set(0, 1, RJet::constant(-0.9));
                m.set(1, 0, RJet::constant(0.9));
                m.set(1, 1, RJet::constant(0.4));
                m
            });
            let region = estimate_region(&l, &chart, 8, 3).unwrap();
            Block::new(h, l, chart, region).unwrap()
        };
        let far = one_d_block(1.0, ParamFn::real(0, &[5.0, 0.2]), [-0.5, 0.5]);
        let glued = glue(&[rot, far]).unwrap();
        let p = [0.1, -0.2, 0.3];
        let report = split_pointwise(&glued.h, &glued.l, &p, 1e-7).unwrap();
        assert_eq!(report.blocks.len(), 2);
        assert!(report.cross_max <= 1e-9, "cross = {}", report.cross_max);
        let pair = report
            .blocks
            .iter()
            .find(|b| b.kind == ClusterKind::ConjugatePair)
            .expect("one conjugate-pair cluster");
        assert_eq!(pair.weight, 2);
        assert!((pair.center.re - 0.4).abs() <= 1e-9);
        assert!((pair.center.im.abs() - 0.9).abs() <= 1e-9);
        // the pair block of h recovers the constant metric diag(1.3, -1.3)
        assert!((report.h.at(0, 0) - 1.3).abs() <= 1e-8);
        assert!((report.h.at(1, 1) + 1.3).abs() <= 1e-8);
    }

    #[test]
    fn close_clusters_collide() {
        // eigenvalues 3e-7 apart: too close to split at tol 1e-7, too far to
        // merge; the direct sum is built by hand since glue would reject it
        let h = MetricField::new(2, |_| {
            let mut m = SmallMatrix::zeros(2);
            m.set(0, 0, RJet::constant(1.0));
            m.set(1, 1, RJet::constant(1.0));
            m
        });
        let l = EndoField::new(2, |_| {
            let mut m = SmallMatrix::zeros(2);
            m.set(0, 0, RJet::constant(1.0));
            m.set(1, 1, RJet::constant(1.0 + 3e-7));
            m
        });
        match split_pointwise(&h, &l, &[0.0, 0.0], 1e-7) {
            Err(Error::ClusterCollision { .. }) => {}
            Ok(report) => {
                // acceptable alternative: the clusterer merged them into one
                assert_eq!(report.blocks.len(), 1);
            }
            other => panic!("expected collision or merge, got {other:?}"),
        }
    }

    #[test]
    fn glue_spec_builds_nested_scenes() {
        let json = r#"{
            "blocks": [
                {"kind": "real_jordan", "n": 1,
                 "params": {"lambda": {"var": 0, "coeffs": [5.0, 0.3]}},
                 "chart": {"box": [[-0.5, 0.5]]}},
                {"kind": "dini"}
            ]
        }"#;
        let spec: GlueSpec = serde_json::from_str(json).unwrap();
        let scene = spec.build().unwrap();
        assert_eq!(scene.name, "glue(real_jordan_n1+dini)");
        assert_eq!(scene.chart.dim(), 3);
        let p = [0.1, 0.2, -0.3];
        let l = scene.l_field().eval_raw(&p).values();
        assert!((l.at(0, 0) - (5.0 + 0.03)).abs() <= 1e-12);
        // nested glue round-trips through serde
        let nested_json = format!(r#"{{"blocks": [{json}, {{"kind": "real_jordan", "n": 1, "params": {{"lambda": {{"var": 0, "coeffs": [9.0]}}}}, "chart": {{"box": [[-0.5, 0.5]]}}}}]}}"#);
        let nested: GlueSpec = serde_json::from_str(&nested_json).unwrap();
        let scene2 = nested.build().unwrap();
        assert_eq!(scene2.chart.dim(), 4);
        assert!(scene2.name.contains("glue(glue("));
    }

    #[test]
    fn region_disjointness_is_symmetric_and_correct() {
        let a = SpectralRegion::new([0.0, 1.0], [0.0, 0.1]);
        let b = SpectralRegion::new([1.5, 2.0], [0.0, 5.0]);
        let c = SpectralRegion::new([0.5, 1.7], [0.5, 1.0]);
        assert!(a.is_disjoint_from(&b));
        assert!(b.is_disjoint_from(&a));
        // c overlaps b in re and in |im|
        assert!(!b.is_disjoint_from(&c));
        // a and c share re range but are separated in |im|
        assert!(a.is_disjoint_from(&c));
        assert!(a.hull(&b).contains(Complex64::new(1.2, 0.05)));
    }
}
