//! Flat parameter storage, layout metadata, initialization and projection.
//!
//! All subnetwork parameters live in one flat vector so the optimizer,
//! regularizer and differentiation templates can address them uniformly.
//! The layout records, per tensor, its flat offset, shape, constraint class
//! and owning subnetwork.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::{NetworkSpec, ENERGY_KERNEL_BOUND};
use crate::scalar::{c, Scalar};

/// Subnetwork identity; also the activity-report ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subnet {
    FicnnFs,
    FicnnF,
    FicnnS,
    PicnnG,
    MlpS,
}

impl Subnet {
    pub const ALL: [Subnet; 5] = [
        Subnet::FicnnFs,
        Subnet::FicnnF,
        Subnet::FicnnS,
        Subnet::PicnnG,
        Subnet::MlpS,
    ];

    /// Constitutive subnetworks entering the activity metric (the auxiliary
    /// MLP is a training accelerator, not part of the learned model).
    pub const CONSTITUTIVE: [Subnet; 4] = [
        Subnet::FicnnFs,
        Subnet::FicnnF,
        Subnet::FicnnS,
        Subnet::PicnnG,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Subnet::FicnnFs => "ficnn_fs",
            Subnet::FicnnF => "ficnn_f",
            Subnet::FicnnS => "ficnn_s",
            Subnet::PicnnG => "picnn_g",
            Subnet::MlpS => "mlp_s",
        }
    }
}

/// Location of one parameter tensor inside the flat vector (row-major).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensorRef {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl TensorRef {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.rows && j < self.cols);
        self.offset + i * self.cols + j
    }
}

/// Tensor metadata: shape, constraint class, owner.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorInfo {
    pub subnet: Subnet,
    pub name: String,
    pub re: TensorRef,
    /// Elementwise lower bound enforced by projection, if constrained.
    pub lower_bound: Option<f64>,
}

/// Layer tensor handles of a FICNN: `x_{l+1} = σ(W x_l + V x_0 + b) − σ(b)`,
/// first layer without the `W` term.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FicnnLayerRefs {
    pub w: Option<TensorRef>,
    pub v: TensorRef,
    pub b: Option<TensorRef>,
}

/// Convex-trunk layer of a PICNN.
///
/// Hidden layers: `σ(Wc[x ⊙ relu(Wcp xp + bcp)] + Vc[x0 ⊙ relu(Vcp xp + ccp)]
/// + Ucp xp + bc) − σ(Ucp xp + bc)`; the first layer omits the `Wc` path, the
/// output layer omits `Ucp`, `bc` and the anchoring shift.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PicnnConvRefs {
    pub wc: Option<TensorRef>,
    pub wcp: Option<TensorRef>,
    pub bcp: Option<TensorRef>,
    pub vc: TensorRef,
    pub vcp: TensorRef,
    pub ccp: TensorRef,
    pub ucp: Option<TensorRef>,
    pub bc: Option<TensorRef>,
}

/// Plain affine layer handles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseLayerRefs {
    pub w: TensorRef,
    pub b: Option<TensorRef>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FicnnLayout {
    pub layers: Vec<FicnnLayerRefs>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PicnnLayout {
    pub conv: Vec<PicnnConvRefs>,
    pub param: Vec<DenseLayerRefs>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpLayout {
    pub layers: Vec<DenseLayerRefs>,
}

/// Complete flat-vector layout of a potential model's parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelLayout {
    pub ficnn_fs: FicnnLayout,
    pub ficnn_f: FicnnLayout,
    pub ficnn_s: FicnnLayout,
    pub picnn_g: PicnnLayout,
    pub mlp_s: MlpLayout,
    pub tensors: Vec<TensorInfo>,
    pub n_params: usize,
}

/// Flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVec<T> {
    pub data: Vec<T>,
}

struct LayoutBuilder {
    tensors: Vec<TensorInfo>,
    cursor: usize,
}

impl LayoutBuilder {
    fn alloc(
        &mut self,
        subnet: Subnet,
        name: String,
        rows: usize,
        cols: usize,
        lower_bound: Option<f64>,
    ) -> TensorRef {
        let re = TensorRef {
            offset: self.cursor,
            rows,
            cols,
        };
        self.cursor += rows * cols;
        self.tensors.push(TensorInfo {
            subnet,
            name,
            re,
            lower_bound,
        });
        re
    }
}

fn build_ficnn(b: &mut LayoutBuilder, subnet: Subnet, s: &super::FicnnSpec) -> FicnnLayout {
    let mut layers = Vec::new();
    let mut widths = vec![s.input_dim];
    widths.extend_from_slice(&s.hidden);
    widths.push(s.output_dim);
    // Hidden layers 0..L-1 plus output layer L.
    for l in 0..=s.hidden.len() {
        let out_w = widths[l + 1];
        let prev_w = widths[l];
        let is_out = l == s.hidden.len();
        let w = if l == 0 {
            None
        } else {
            Some(b.alloc(
                subnet,
                format!("{}.L{l}.W", subnet.name()),
                out_w,
                prev_w,
                Some(ENERGY_KERNEL_BOUND),
            ))
        };
        let v = b.alloc(
            subnet,
            format!("{}.L{l}.V", subnet.name()),
            out_w,
            s.input_dim,
            Some(ENERGY_KERNEL_BOUND),
        );
        let bias = if is_out && !s.output_bias {
            None
        } else {
            Some(b.alloc(subnet, format!("{}.L{l}.b", subnet.name()), out_w, 1, None))
        };
        layers.push(FicnnLayerRefs { w, v, b: bias });
    }
    FicnnLayout { layers }
}

fn build_picnn(b: &mut LayoutBuilder, sg: &super::PicnnSpec) -> PicnnLayout {
    let sub = Subnet::PicnnG;
    let mut conv = Vec::new();
    let mut cw = vec![sg.conv_input_dim];
    cw.extend_from_slice(&sg.conv_hidden);
    cw.push(1); // scalar potential
    let mut pw = vec![sg.param_input_dim];
    pw.extend_from_slice(&sg.param_hidden);
    for l in 0..=sg.conv_hidden.len() {
        let out_w = cw[l + 1];
        let prev_w = cw[l];
        let p_w = pw[l.min(pw.len() - 1)];
        let is_first = l == 0;
        let is_out = l == sg.conv_hidden.len();
        let (wc, wcp, bcp) = if is_first {
            (None, None, None)
        } else {
            (
                Some(b.alloc(sub, format!("picnn_g.L{l}.Wc"), out_w, prev_w, Some(0.0))),
                Some(b.alloc(sub, format!("picnn_g.L{l}.Wcp"), prev_w, p_w, None)),
                Some(b.alloc(sub, format!("picnn_g.L{l}.bcp"), prev_w, 1, None)),
            )
        };
        let vc = b.alloc(
            sub,
            format!("picnn_g.L{l}.Vc"),
            out_w,
            sg.conv_input_dim,
            Some(0.0),
        );
        let vcp = b.alloc(
            sub,
            format!("picnn_g.L{l}.Vcp"),
            sg.conv_input_dim,
            p_w,
            None,
        );
        let ccp = b.alloc(sub, format!("picnn_g.L{l}.ccp"), sg.conv_input_dim, 1, None);
        let (ucp, bc) = if is_out {
            (None, None)
        } else {
            (
                Some(b.alloc(sub, format!("picnn_g.L{l}.Ucp"), out_w, p_w, None)),
                Some(b.alloc(sub, format!("picnn_g.L{l}.bc"), out_w, 1, None)),
            )
        };
        conv.push(PicnnConvRefs {
            wc,
            wcp,
            bcp,
            vc,
            vcp,
            ccp,
            ucp,
            bc,
        });
    }
    let mut param = Vec::new();
    for l in 0..sg.param_hidden.len() {
        let w = b.alloc(sub, format!("picnn_g.P{l}.Wp"), pw[l + 1], pw[l], None);
        let bias = Some(b.alloc(sub, format!("picnn_g.P{l}.bp"), pw[l + 1], 1, None));
        param.push(DenseLayerRefs { w, b: bias });
    }
    PicnnLayout { conv, param }
}

fn build_mlp(b: &mut LayoutBuilder, subnet: Subnet, sm: &super::MlpSpec) -> MlpLayout {
    let mut layers = Vec::new();
    let mut mw = vec![sm.input_dim];
    mw.extend_from_slice(&sm.hidden);
    mw.push(sm.output_dim);
    for l in 0..=sm.hidden.len() {
        let is_out = l == sm.hidden.len();
        let w = b.alloc(subnet, format!("{}.L{l}.W", subnet.name()), mw[l + 1], mw[l], None);
        let bias = if is_out && !sm.output_bias {
            None
        } else {
            Some(b.alloc(subnet, format!("{}.L{l}.b", subnet.name()), mw[l + 1], 1, None))
        };
        layers.push(DenseLayerRefs { w, b: bias });
    }
    MlpLayout { layers }
}

impl FicnnLayout {
    /// Layout for a FICNN on its own (tests, standalone use).
    pub fn standalone(spec: &super::FicnnSpec) -> (Self, Vec<TensorInfo>, usize) {
        let mut b = LayoutBuilder {
            tensors: Vec::new(),
            cursor: 0,
        };
        let lay = build_ficnn(&mut b, Subnet::FicnnFs, spec);
        (lay, b.tensors, b.cursor)
    }
}

impl PicnnLayout {
    pub fn standalone(spec: &super::PicnnSpec) -> (Self, Vec<TensorInfo>, usize) {
        let mut b = LayoutBuilder {
            tensors: Vec::new(),
            cursor: 0,
        };
        let lay = build_picnn(&mut b, spec);
        (lay, b.tensors, b.cursor)
    }
}

impl MlpLayout {
    pub fn standalone(spec: &super::MlpSpec) -> (Self, Vec<TensorInfo>, usize) {
        let mut b = LayoutBuilder {
            tensors: Vec::new(),
            cursor: 0,
        };
        let lay = build_mlp(&mut b, Subnet::MlpS, spec);
        (lay, b.tensors, b.cursor)
    }
}

impl ModelLayout {
    /// Builds the flat layout for a network specification.
    ///
    /// Constraint classes: energy-network kernels (`W`, `V` of all FICNN
    /// layers) are bounded below by 1e-7; dissipation convex-trunk kernels
    /// (`Wc`, `Vc`) by 0; coupling, parameter-branch and bias tensors are
    /// unconstrained.
    pub fn new(spec: &NetworkSpec) -> Self {
        let mut b = LayoutBuilder {
            tensors: Vec::new(),
            cursor: 0,
        };
        let ficnn_fs = build_ficnn(&mut b, Subnet::FicnnFs, &spec.ficnn_fs);
        let ficnn_f = build_ficnn(&mut b, Subnet::FicnnF, &spec.ficnn_f);
        let ficnn_s = build_ficnn(&mut b, Subnet::FicnnS, &spec.ficnn_s);
        let picnn_g = build_picnn(&mut b, &spec.picnn_g);
        let mlp_s = build_mlp(&mut b, Subnet::MlpS, &spec.mlp_s);

        ModelLayout {
            ficnn_fs,
            ficnn_f,
            ficnn_s,
            picnn_g,
            mlp_s,
            tensors: b.tensors,
            n_params: b.cursor,
        }
    }

    /// Per-entry lower bounds aligned with the flat vector.
    pub fn bounds(&self) -> Vec<Option<f64>> {
        let mut out = vec![None; self.n_params];
        for t in &self.tensors {
            if let Some(lb) = t.lower_bound {
                for k in 0..t.re.len() {
                    out[t.re.offset + k] = Some(lb);
                }
            }
        }
        out
    }

    pub fn tensors_of(&self, subnet: Subnet) -> impl Iterator<Item = &TensorInfo> {
        self.tensors.iter().filter(move |t| t.subnet == subnet)
    }
}

impl<T: Scalar> ParamVec<T> {
    pub fn zeros(layout: &ModelLayout) -> Self {
        ParamVec {
            data: vec![T::zero(); layout.n_params],
        }
    }

    pub fn get(&self, re: TensorRef, i: usize, j: usize) -> T {
        self.data[re.idx(i, j)]
    }
}

/// Deterministic initialization.
///
/// Constrained kernels are drawn strictly feasible, uniform in
/// `[lower_bound + 1e-7, 1/fan_in]`; unconstrained tensors uniform in
/// `±1/√fan_in`; biases zero.
pub fn init_params<T: Scalar>(spec: &NetworkSpec, layout: &ModelLayout, seed: u64) -> ParamVec<T> {
    let _ = spec;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut p = ParamVec::zeros(layout);
    for t in &layout.tensors {
        let kind = t.name.rsplit('.').next().unwrap_or("");
        // Gate biases start at one so the multiplicative relu gates pass
        // signal from the first epoch; ordinary biases start at zero.
        if matches!(kind, "bcp" | "ccp") {
            for k in 0..t.re.len() {
                p.data[t.re.offset + k] = T::one();
            }
            continue;
        }
        if matches!(kind, "b" | "bc" | "bp") {
            continue; // stays zero
        }
        let fan_in = t.re.cols.max(1) as f64;
        match t.lower_bound {
            Some(lb) => {
                let lo = lb + 1e-7;
                let hi = (1.0 / fan_in).max(lo * 2.0);
                for k in 0..t.re.len() {
                    p.data[t.re.offset + k] = c::<T>(rng.gen_range(lo..hi));
                }
            }
            None => {
                let s = 1.0 / fan_in.sqrt();
                for k in 0..t.re.len() {
                    p.data[t.re.offset + k] = c::<T>(rng.gen_range(-s..s));
                }
            }
        }
    }
    p
}

/// Clamps every constrained entry to its bound; unconstrained entries are
/// untouched. Idempotent.
pub fn project_constraints<T: Scalar>(params: &mut ParamVec<T>, layout: &ModelLayout) {
    for t in &layout.tensors {
        if let Some(lb) = t.lower_bound {
            let lb = c::<T>(lb);
            for k in 0..t.re.len() {
                let v = &mut params.data[t.re.offset + k];
                if *v < lb {
                    *v = lb;
                }
            }
        }
    }
}

/// Returns true when every constrained entry satisfies its bound.
pub fn constraints_satisfied<T: Scalar>(params: &ParamVec<T>, layout: &ModelLayout) -> bool {
    layout.tensors.iter().all(|t| match t.lower_bound {
        Some(lb) => {
            let lb = c::<T>(lb);
            (0..t.re.len()).all(|k| params.data[t.re.offset + k] >= lb)
        }
        None => true,
    })
}

/// Aggregate Frobenius norm of a subnetwork's tensors.
pub fn subnet_activity<T: Scalar>(params: &ParamVec<T>, layout: &ModelLayout, subnet: Subnet) -> T {
    let mut total = T::zero();
    for t in layout.tensors_of(subnet) {
        let mut sq = T::zero();
        for k in 0..t.re.len() {
            let v = params.data[t.re.offset + k];
            sq = sq + v * v;
        }
        total = total + sq.sqrt();
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::NetworkSpec;

    #[test]
    fn default_layout_shapes() {
        let spec = NetworkSpec::default();
        spec.validate().unwrap();
        let layout = ModelLayout::new(&spec);
        // FICNN_{F,s}: L0 V 12×5 + b 12; L1 W 12×12 V 12×5 b 12; out W 1×12 V 1×5 b 1.
        assert_eq!(layout.ficnn_fs.layers.len(), 3);
        assert!(layout.ficnn_fs.layers[0].w.is_none());
        assert_eq!(layout.ficnn_fs.layers[1].w.unwrap().rows, 12);
        assert_eq!(layout.ficnn_fs.layers[2].v.rows, 1);
        // PICNN: 3 hidden + output conv transforms, 3 param layers.
        assert_eq!(layout.picnn_g.conv.len(), 4);
        assert_eq!(layout.picnn_g.param.len(), 3);
        assert!(layout.picnn_g.conv[0].wc.is_none());
        assert!(layout.picnn_g.conv[3].ucp.is_none());
        assert!(layout.picnn_g.conv[3].bc.is_none());
        // Total parameter count is the sum of all tensor sizes.
        let total: usize = layout.tensors.iter().map(|t| t.re.len()).sum();
        assert_eq!(total, layout.n_params);
    }

    #[test]
    fn init_is_deterministic_and_feasible() {
        let spec = NetworkSpec::default();
        let layout = ModelLayout::new(&spec);
        let a: ParamVec<f64> = init_params(&spec, &layout, 7);
        let b: ParamVec<f64> = init_params(&spec, &layout, 7);
        assert_eq!(a.data, b.data);
        let c: ParamVec<f64> = init_params(&spec, &layout, 8);
        assert_ne!(a.data, c.data);
        assert!(constraints_satisfied(&a, &layout));
        // Constrained kernels strictly feasible.
        for t in &layout.tensors {
            if let Some(lb) = t.lower_bound {
                for k in 0..t.re.len() {
                    assert!(a.data[t.re.offset + k] >= lb + 1e-8 || t.re.len() == 0);
                }
            }
        }
    }

    #[test]
    fn projection_clamps_and_is_idempotent() {
        let spec = NetworkSpec::default();
        let layout = ModelLayout::new(&spec);
        let mut p: ParamVec<f64> = init_params(&spec, &layout, 3);
        // Push an energy kernel entry negative and a dissipation kernel negative.
        let energy = layout.ficnn_fs.layers[1].w.unwrap();
        let diss = layout.picnn_g.conv[1].wc.unwrap();
        p.data[energy.idx(0, 0)] = -0.5;
        p.data[diss.idx(0, 0)] = -0.3;
        let feasible = layout.mlp_s.layers[0].w;
        p.data[feasible.idx(0, 0)] = 0.2;
        project_constraints(&mut p, &layout);
        assert_eq!(p.data[energy.idx(0, 0)], 1e-7);
        assert_eq!(p.data[diss.idx(0, 0)], 0.0);
        assert_eq!(p.data[feasible.idx(0, 0)], 0.2);
        let snapshot = p.data.clone();
        project_constraints(&mut p, &layout);
        assert_eq!(snapshot, p.data);
        assert!(constraints_satisfied(&p, &layout));
    }

    #[test]
    fn activity_is_scale_invariant_ratio() {
        let spec = NetworkSpec::default();
        let layout = ModelLayout::new(&spec);
        let p: ParamVec<f64> = init_params(&spec, &layout, 1);
        let acts: Vec<f64> = Subnet::CONSTITUTIVE
            .iter()
            .map(|&s| subnet_activity(&p, &layout, s))
            .collect();
        let total: f64 = acts.iter().sum();
        let mut scaled = p.clone();
        for v in scaled.data.iter_mut() {
            *v *= 3.0;
        }
        let acts2: Vec<f64> = Subnet::CONSTITUTIVE
            .iter()
            .map(|&s| subnet_activity(&scaled, &layout, s))
            .collect();
        let total2: f64 = acts2.iter().sum();
        for (a, b) in acts.iter().zip(&acts2) {
            assert!((a / total - b / total2).abs() < 1e-12);
        }
    }
}
