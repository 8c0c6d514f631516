//! Append-only computation record over flat `f64` vectors.
//!
//! Every node holds a flat vector value (a scalar is a vector of length one).
//! There is no broadcasting: element-wise binary ops require equal lengths,
//! and the only vector/scalar mix is [`Tape::scale`].
//!
//! Three passes run over a finished tape:
//! * replay ([`Tape::evaluate`]) with new leaf values,
//! * reverse mode ([`Tape::adjoints`], [`Tape::gradient`]),
//! * forward-over-reverse ([`Tape::directional`], [`Tape::mixed_second`]):
//!   a forward tangent sweep seeded on some leaves followed by a reverse
//!   sweep on dual numbers. The tangent part of the adjoints is the
//!   directional derivative of the gradient, e.g. `d/dθ [vᵀ ∇_z H]`.
//!
//! All opcodes are smooth, so no subgradient conventions are needed.
//! `recip` at zero yields a non-finite value, which the passes report.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::math;

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafKind {
    Input,
    Param,
    Const,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unary {
    Neg,
    Recip,
    Sin,
    Cos,
    Exp,
    Tanh,
    Softplus,
    Square,
}

impl Unary {
    fn value(self, x: f64) -> f64 {
        match self {
            Unary::Neg => -x,
            Unary::Recip => 1.0 / x,
            Unary::Sin => math::sin(x),
            Unary::Cos => math::cos(x),
            Unary::Exp => math::exp(x),
            Unary::Tanh => math::tanh(x),
            Unary::Softplus => math::softplus(x),
            Unary::Square => x * x,
        }
    }

    /// First and second derivative at `x`; `y` is the cached primal.
    fn derivs(self, x: f64, y: f64) -> (f64, f64) {
        match self {
            Unary::Neg => (-1.0, 0.0),
            Unary::Recip => (-y * y, 2.0 * y * y * y),
            Unary::Sin => (math::cos(x), -y),
            Unary::Cos => (-math::sin(x), -y),
            Unary::Exp => (y, y),
            Unary::Tanh => {
                let d = 1.0 - y * y;
                (d, -2.0 * y * d)
            }
            Unary::Softplus => {
                let s = math::sigmoid(x);
                (s, s * (1.0 - s))
            }
            Unary::Square => (2.0 * x, 2.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Leaf(LeafKind),
    Unary(Unary),
    Add,
    Mul,
    Sum,
    Dot,
    /// `W x + b` with `W` stored row-major as `rows × cols`.
    Affine { rows: usize, cols: usize },
    /// Vector times a length-one node.
    Scale,
    Concat,
    Slice { start: usize },
    /// Block average over `factor × factor` cells of a `channels × ny × nx` field.
    AvgPool {
        channels: usize,
        ny: usize,
        nx: usize,
        factor: usize,
    },
    /// Periodic 2D cross-correlation, inputs `(x, weight, bias)`.
    Conv {
        cin: usize,
        cout: usize,
        ny: usize,
        nx: usize,
        kernel: usize,
    },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    args_start: usize,
    args_len: usize,
    offset: usize,
    len: usize,
}

/// Computation record. Recording is single-writer; every pass over a
/// finished tape takes `&self`.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    args: Vec<usize>,
    values: Vec<f64>,
    leaves: Vec<usize>,
    output: Option<usize>,
}

/// Reverse-mode adjoints for every node.
#[derive(Debug, Clone)]
pub struct Adjoints {
    offsets: Vec<(usize, usize)>,
    adj: Vec<f64>,
}

impl Adjoints {
    pub fn of(&self, v: Var) -> &[f64] {
        let (o, l) = self.offsets[v.0];
        &self.adj[o..o + l]
    }

    pub fn gather(&self, vars: &[Var]) -> Vec<f64> {
        let mut out = Vec::new();
        for &v in vars {
            out.extend_from_slice(self.of(v));
        }
        out
    }
}

/// Adjoints together with their tangents from a forward-over-reverse pass.
#[derive(Debug, Clone)]
pub struct DualAdjoints {
    pub adjoint: Adjoints,
    pub tangent: Adjoints,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        let n = &self.nodes[v.0];
        &self.values[n.offset..n.offset + n.len]
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[0]
    }

    pub fn len_of(&self, v: Var) -> usize {
        self.nodes[v.0].len
    }

    pub fn op(&self, v: Var) -> Op {
        self.nodes[v.0].op
    }

    /// Leaves in creation order.
    pub fn leaves(&self) -> impl Iterator<Item = Var> + '_ {
        self.leaves.iter().map(|&i| Var(i))
    }

    /// Total number of scalar leaf values, the length [`Tape::evaluate`] expects.
    pub fn leaf_len(&self) -> usize {
        self.leaves.iter().map(|&i| self.nodes[i].len).sum()
    }

    pub fn set_output(&mut self, v: Var) {
        self.output = Some(v.0);
    }

    pub fn output(&self) -> Option<Var> {
        self.output.map(Var)
    }

    fn push(&mut self, op: Op, args: &[usize], value: &[f64]) -> Var {
        let args_start = self.args.len();
        self.args.extend_from_slice(args);
        let offset = self.values.len();
        self.values.extend_from_slice(value);
        self.nodes.push(Node {
            op,
            args_start,
            args_len: args.len(),
            offset,
            len: value.len(),
        });
        Var(self.nodes.len() - 1)
    }

    fn leaf(&mut self, kind: LeafKind, value: &[f64]) -> Var {
        let v = self.push(Op::Leaf(kind), &[], value);
        self.leaves.push(v.0);
        v
    }

    pub fn input(&mut self, value: &[f64]) -> Var {
        self.leaf(LeafKind::Input, value)
    }

    pub fn param(&mut self, value: &[f64]) -> Var {
        self.leaf(LeafKind::Param, value)
    }

    pub fn constant(&mut self, value: &[f64]) -> Var {
        self.leaf(LeafKind::Const, value)
    }

    /// Appends a node, computing its primal from the current cached values.
    fn record(&mut self, op: Op, args: &[usize], len: usize) -> Var {
        let mut out = vec![0.0; len];
        {
            let ins: Vec<&[f64]> = args
                .iter()
                .map(|&a| {
                    let n = &self.nodes[a];
                    &self.values[n.offset..n.offset + n.len]
                })
                .collect();
            forward_op(op, &ins, &mut out);
        }
        self.push(op, args, &out)
    }

    fn unary(&mut self, u: Unary, a: Var) -> Var {
        let len = self.len_of(a);
        self.record(Op::Unary(u), &[a.0], len)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.unary(Unary::Neg, a)
    }
    pub fn recip(&mut self, a: Var) -> Var {
        self.unary(Unary::Recip, a)
    }
    pub fn sin(&mut self, a: Var) -> Var {
        self.unary(Unary::Sin, a)
    }
    pub fn cos(&mut self, a: Var) -> Var {
        self.unary(Unary::Cos, a)
    }
    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(Unary::Exp, a)
    }
    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(Unary::Tanh, a)
    }
    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(Unary::Softplus, a)
    }
    pub fn square(&mut self, a: Var) -> Var {
        self.unary(Unary::Square, a)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let len = self.len_of(a);
        assert_eq!(len, self.len_of(b), "add: length mismatch");
        self.record(Op::Add, &[a.0, b.0], len)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let nb = self.neg(b);
        self.add(a, nb)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let len = self.len_of(a);
        assert_eq!(len, self.len_of(b), "mul: length mismatch");
        self.record(Op::Mul, &[a.0, b.0], len)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        self.record(Op::Sum, &[a.0], 1)
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.len_of(a), self.len_of(b), "dot: length mismatch");
        self.record(Op::Dot, &[a.0, b.0], 1)
    }

    /// `w · x + b` where `w` is `rows × cols` row-major.
    pub fn affine(&mut self, w: Var, x: Var, b: Var, rows: usize, cols: usize) -> Var {
        assert_eq!(self.len_of(w), rows * cols, "affine: weight length");
        assert_eq!(self.len_of(x), cols, "affine: input length");
        assert_eq!(self.len_of(b), rows, "affine: bias length");
        self.record(Op::Affine { rows, cols }, &[w.0, x.0, b.0], rows)
    }

    /// `s · a` for a length-one node `s`.
    pub fn scale(&mut self, a: Var, s: Var) -> Var {
        assert_eq!(self.len_of(s), 1, "scale: factor must be scalar");
        let len = self.len_of(a);
        self.record(Op::Scale, &[a.0, s.0], len)
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let len = parts.iter().map(|&p| self.len_of(p)).sum();
        let args: Vec<usize> = parts.iter().map(|p| p.0).collect();
        self.record(Op::Concat, &args, len)
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Var {
        assert!(start + len <= self.len_of(a), "slice out of range");
        self.record(Op::Slice { start }, &[a.0], len)
    }

    pub fn avg_pool(&mut self, a: Var, channels: usize, ny: usize, nx: usize, factor: usize) -> Var {
        assert_eq!(self.len_of(a), channels * ny * nx, "avg_pool: input length");
        assert!(factor > 0 && ny % factor == 0 && nx % factor == 0, "avg_pool: factor");
        let len = channels * (ny / factor) * (nx / factor);
        self.record(
            Op::AvgPool {
                channels,
                ny,
                nx,
                factor,
            },
            &[a.0],
            len,
        )
    }

    /// Periodic cross-correlation of a `cin × ny × nx` field with a
    /// `cout × cin × kernel × kernel` weight, plus a per-channel bias.
    pub fn conv(&mut self, x: Var, w: Var, b: Var, shape: ConvShape) -> Var {
        let ConvShape {
            cin,
            cout,
            ny,
            nx,
            kernel,
        } = shape;
        assert_eq!(self.len_of(x), cin * ny * nx, "conv: input length");
        assert_eq!(self.len_of(w), cout * cin * kernel * kernel, "conv: weight length");
        assert_eq!(self.len_of(b), cout, "conv: bias length");
        assert!(kernel % 2 == 1, "conv: kernel must be odd");
        self.record(
            Op::Conv {
                cin,
                cout,
                ny,
                nx,
                kernel,
            },
            &[x.0, w.0, b.0],
            cout * ny * nx,
        )
    }

    fn args_of(&self, n: &Node) -> &[usize] {
        &self.args[n.args_start..n.args_start + n.args_len]
    }

    /// First node (in recording order) holding a non-finite value.
    pub fn check_finite(&self) -> Result<()> {
        check_buffer_finite(&self.nodes, &self.values)
    }

    /// Replays the tape with new leaf values (concatenated in leaf order) and
    /// returns the output node's value.
    pub fn evaluate(&self, leaf_values: &[f64]) -> Result<Vec<f64>> {
        check_len("leaf values", self.leaf_len(), leaf_values.len())?;
        if leaf_values.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("leaf values must be finite".into()));
        }
        let out = self.output.ok_or(Error::NoOutput)?;
        let vals = self.replay(leaf_values);
        check_buffer_finite(&self.nodes, &vals)?;
        let n = &self.nodes[out];
        Ok(vals[n.offset..n.offset + n.len].to_vec())
    }

    /// Full value buffer recomputed from the given leaf values.
    pub fn replay(&self, leaf_values: &[f64]) -> Vec<f64> {
        let mut vals = vec![0.0; self.values.len()];
        let mut cursor = 0;
        for &li in &self.leaves {
            let n = &self.nodes[li];
            vals[n.offset..n.offset + n.len].copy_from_slice(&leaf_values[cursor..cursor + n.len]);
            cursor += n.len;
        }
        for n in &self.nodes {
            if matches!(n.op, Op::Leaf(_)) {
                continue;
            }
            let (before, after) = vals.split_at_mut(n.offset);
            let ins: Vec<&[f64]> = self
                .args_of(n)
                .iter()
                .map(|&a| {
                    let m = &self.nodes[a];
                    &before[m.offset..m.offset + m.len]
                })
                .collect();
            forward_op(n.op, &ins, &mut after[..n.len]);
        }
        vals
    }

    /// Cached primal buffer, in node order.
    pub fn cached_values(&self) -> &[f64] {
        &self.values
    }

    fn scalar_output(&self) -> Result<usize> {
        let out = self.output.ok_or(Error::NoOutput)?;
        let len = self.nodes[out].len;
        if len != 1 {
            return Err(Error::NotScalarOutput { len });
        }
        Ok(out)
    }

    fn offsets(&self) -> Vec<(usize, usize)> {
        self.nodes.iter().map(|n| (n.offset, n.len)).collect()
    }

    /// Reverse sweep from the scalar output.
    pub fn adjoints(&self) -> Result<Adjoints> {
        let out = self.scalar_output()?;
        self.check_finite()?;
        let mut adj = vec![0.0; self.values.len()];
        adj[self.nodes[out].offset] = 1.0;
        self.reverse(out, &mut adj, None);
        Ok(Adjoints {
            offsets: self.offsets(),
            adj,
        })
    }

    /// Gradient of the scalar output with respect to `wrt`, concatenated.
    pub fn gradient(&self, wrt: &[Var]) -> Result<Vec<f64>> {
        Ok(self.adjoints()?.gather(wrt))
    }

    /// Forward-over-reverse pass. `seeds` gives tangent directions for some
    /// leaves; all other leaves have zero tangent.
    pub fn directional(&self, seeds: &[(Var, &[f64])]) -> Result<DualAdjoints> {
        let out = self.scalar_output()?;
        self.check_finite()?;
        let mut tan = vec![0.0; self.values.len()];
        for &(v, d) in seeds {
            let n = &self.nodes[v.0];
            if !matches!(n.op, Op::Leaf(_)) {
                return Err(Error::InvalidParameter("tangent seeds must be leaves".into()));
            }
            check_len("tangent direction", n.len, d.len())?;
            tan[n.offset..n.offset + n.len].copy_from_slice(d);
        }
        self.forward_tangents(&mut tan);
        let mut adj = vec![0.0; self.values.len()];
        let mut tadj = vec![0.0; self.values.len()];
        adj[self.nodes[out].offset] = 1.0;
        self.reverse(out, &mut adj, Some((&tan, &mut tadj)));
        let offsets = self.offsets();
        Ok(DualAdjoints {
            adjoint: Adjoints {
                offsets: offsets.clone(),
                adj,
            },
            tangent: Adjoints { offsets, adj: tadj },
        })
    }

    /// `∂/∂wrt [ dirᵀ ∇_{dir_leaf} f ]` for the scalar output `f`.
    pub fn mixed_second(&self, dir_leaf: Var, dir: &[f64], wrt: &[Var]) -> Result<Vec<f64>> {
        Ok(self.directional(&[(dir_leaf, dir)])?.tangent.gather(wrt))
    }

    fn forward_tangents(&self, tan: &mut [f64]) {
        for n in &self.nodes {
            if matches!(n.op, Op::Leaf(_)) {
                continue;
            }
            let args = self.args_of(n);
            let (tb, ta) = tan.split_at_mut(n.offset);
            let out_t = &mut ta[..n.len];
            let xs: Vec<&[f64]> = args.iter().map(|&a| self.slice_of(&self.values, a)).collect();
            let ts: Vec<&[f64]> = args
                .iter()
                .map(|&a| {
                    let m = &self.nodes[a];
                    &tb[m.offset..m.offset + m.len]
                })
                .collect();
            let y = &self.values[n.offset..n.offset + n.len];
            tangent_op(n.op, &xs, &ts, y, out_t);
        }
    }

    fn slice_of<'a>(&self, buf: &'a [f64], node: usize) -> &'a [f64] {
        let m = &self.nodes[node];
        &buf[m.offset..m.offset + m.len]
    }

    /// Reverse sweep from `out` down. With `dual`, also propagates adjoint
    /// tangents using primal tangents `dual.0`.
    fn reverse(&self, out: usize, adj: &mut [f64], mut dual: Option<(&[f64], &mut [f64])>) {
        for idx in (0..=out).rev() {
            let n = &self.nodes[idx];
            if matches!(n.op, Op::Leaf(_)) {
                continue;
            }
            let g: Vec<f64> = adj[n.offset..n.offset + n.len].to_vec();
            let tg: Option<Vec<f64>> = dual
                .as_ref()
                .map(|(_, ta)| ta[n.offset..n.offset + n.len].to_vec());
            if g.iter().all(|&x| x == 0.0) && tg.as_ref().is_none_or(|t| t.iter().all(|&x| x == 0.0)) {
                continue;
            }
            let args = self.args_of(n);
            let y = &self.values[n.offset..n.offset + n.len];
            match &mut dual {
                None => backward_op(self, n.op, args, y, &g, adj, None),
                Some((tan, tadj)) => backward_op(
                    self,
                    n.op,
                    args,
                    y,
                    &g,
                    adj,
                    Some(DualCtx {
                        tan,
                        tg: tg.as_deref().unwrap_or(&[]),
                        tadj,
                    }),
                ),
            }
        }
    }
}

/// Shape of a periodic convolution node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub cin: usize,
    pub cout: usize,
    pub ny: usize,
    pub nx: usize,
    pub kernel: usize,
}

fn check_buffer_finite(nodes: &[Node], vals: &[f64]) -> Result<()> {
    for (i, n) in nodes.iter().enumerate() {
        if vals[n.offset..n.offset + n.len].iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite { node: i });
        }
    }
    Ok(())
}

#[inline]
fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

fn forward_op(op: Op, ins: &[&[f64]], out: &mut [f64]) {
    match op {
        Op::Leaf(_) => unreachable!("leaves are not recomputed"),
        Op::Unary(u) => {
            for (o, &x) in out.iter_mut().zip(ins[0]) {
                *o = u.value(x);
            }
        }
        Op::Add => {
            for ((o, &a), &b) in out.iter_mut().zip(ins[0]).zip(ins[1]) {
                *o = a + b;
            }
        }
        Op::Mul => {
            for ((o, &a), &b) in out.iter_mut().zip(ins[0]).zip(ins[1]) {
                *o = a * b;
            }
        }
        Op::Sum => out[0] = ins[0].iter().sum(),
        Op::Dot => out[0] = ins[0].iter().zip(ins[1]).map(|(a, b)| a * b).sum(),
        Op::Affine { rows, cols } => {
            let (w, x, b) = (ins[0], ins[1], ins[2]);
            for r in 0..rows {
                let row = &w[r * cols..(r + 1) * cols];
                out[r] = b[r] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        Op::Scale => {
            let s = ins[1][0];
            for (o, &a) in out.iter_mut().zip(ins[0]) {
                *o = s * a;
            }
        }
        Op::Concat => {
            let mut c = 0;
            for part in ins {
                out[c..c + part.len()].copy_from_slice(part);
                c += part.len();
            }
        }
        Op::Slice { start } => {
            let len = out.len();
            out.copy_from_slice(&ins[0][start..start + len]);
        }
        Op::AvgPool {
            channels,
            ny,
            nx,
            factor,
        } => pool_forward(ins[0], out, channels, ny, nx, factor),
        Op::Conv {
            cin,
            cout,
            ny,
            nx,
            kernel,
        } => {
            let shape = ConvShape {
                cin,
                cout,
                ny,
                nx,
                kernel,
            };
            conv_forward(ins[0], ins[1], shape, out);
            for co in 0..cout {
                let b = ins[2][co];
                for o in &mut out[co * ny * nx..(co + 1) * ny * nx] {
                    *o += b;
                }
            }
        }
    }
}

fn pool_forward(x: &[f64], out: &mut [f64], channels: usize, ny: usize, nx: usize, f: usize) {
    let (py, px) = (ny / f, nx / f);
    let inv = 1.0 / (f * f) as f64;
    out.iter_mut().for_each(|o| *o = 0.0);
    for c in 0..channels {
        for j in 0..ny {
            for i in 0..nx {
                out[c * py * px + (j / f) * px + i / f] += x[c * ny * nx + j * nx + i] * inv;
            }
        }
    }
}

fn pool_backward(g: &[f64], gx: &mut [f64], channels: usize, ny: usize, nx: usize, f: usize) {
    let (py, px) = (ny / f, nx / f);
    let inv = 1.0 / (f * f) as f64;
    for c in 0..channels {
        for j in 0..ny {
            for i in 0..nx {
                gx[c * ny * nx + j * nx + i] += g[c * py * px + (j / f) * px + i / f] * inv;
            }
        }
    }
}

/// Accumulates `corr(x, w)` (without bias) into `out`, which is first zeroed.
fn conv_forward(x: &[f64], w: &[f64], s: ConvShape, out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    conv_accumulate(x, w, s, out);
}

fn conv_accumulate(x: &[f64], w: &[f64], s: ConvShape, out: &mut [f64]) {
    let ConvShape {
        cin,
        cout,
        ny,
        nx,
        kernel,
    } = s;
    let r = (kernel / 2) as isize;
    let plane = ny * nx;
    for co in 0..cout {
        let o_plane = &mut out[co * plane..(co + 1) * plane];
        for ci in 0..cin {
            let x_plane = &x[ci * plane..(ci + 1) * plane];
            for dj in 0..kernel {
                for di in 0..kernel {
                    let wv = w[((co * cin + ci) * kernel + dj) * kernel + di];
                    if wv == 0.0 {
                        continue;
                    }
                    let oy = dj as isize - r;
                    let ox = di as isize - r;
                    for j in 0..ny {
                        let sj = wrap(j as isize + oy, ny);
                        let xrow = &x_plane[sj * nx..(sj + 1) * nx];
                        let orow = &mut o_plane[j * nx..(j + 1) * nx];
                        for (i, o) in orow.iter_mut().enumerate() {
                            *o += wv * xrow[wrap(i as isize + ox, nx)];
                        }
                    }
                }
            }
        }
    }
}

/// `gx += corrᵀ(g, w)`: adjoint of the convolution with respect to its input.
fn conv_input_adjoint(g: &[f64], w: &[f64], s: ConvShape, gx: &mut [f64]) {
    let ConvShape {
        cin,
        cout,
        ny,
        nx,
        kernel,
    } = s;
    let r = (kernel / 2) as isize;
    let plane = ny * nx;
    for co in 0..cout {
        let g_plane = &g[co * plane..(co + 1) * plane];
        for ci in 0..cin {
            let gx_plane = &mut gx[ci * plane..(ci + 1) * plane];
            for dj in 0..kernel {
                for di in 0..kernel {
                    let wv = w[((co * cin + ci) * kernel + dj) * kernel + di];
                    if wv == 0.0 {
                        continue;
                    }
                    let oy = dj as isize - r;
                    let ox = di as isize - r;
                    for j in 0..ny {
                        let sj = wrap(j as isize + oy, ny);
                        let grow = &g_plane[j * nx..(j + 1) * nx];
                        let xrow = &mut gx_plane[sj * nx..(sj + 1) * nx];
                        for (i, &gv) in grow.iter().enumerate() {
                            xrow[wrap(i as isize + ox, nx)] += wv * gv;
                        }
                    }
                }
            }
        }
    }
}

/// `gw += Σ_pixels g ⊗ shifted(x)`: adjoint with respect to the weight.
fn conv_weight_adjoint(g: &[f64], x: &[f64], s: ConvShape, gw: &mut [f64]) {
    let ConvShape {
        cin,
        cout,
        ny,
        nx,
        kernel,
    } = s;
    let r = (kernel / 2) as isize;
    let plane = ny * nx;
    for co in 0..cout {
        let g_plane = &g[co * plane..(co + 1) * plane];
        for ci in 0..cin {
            let x_plane = &x[ci * plane..(ci + 1) * plane];
            for dj in 0..kernel {
                for di in 0..kernel {
                    let oy = dj as isize - r;
                    let ox = di as isize - r;
                    let mut acc = 0.0;
                    for j in 0..ny {
                        let sj = wrap(j as isize + oy, ny);
                        let grow = &g_plane[j * nx..(j + 1) * nx];
                        let xrow = &x_plane[sj * nx..(sj + 1) * nx];
                        for (i, &gv) in grow.iter().enumerate() {
                            acc += gv * xrow[wrap(i as isize + ox, nx)];
                        }
                    }
                    gw[((co * cin + ci) * kernel + dj) * kernel + di] += acc;
                }
            }
        }
    }
}

fn tangent_op(op: Op, xs: &[&[f64]], ts: &[&[f64]], y: &[f64], out: &mut [f64]) {
    match op {
        Op::Leaf(_) => unreachable!(),
        Op::Unary(u) => {
            for k in 0..out.len() {
                out[k] = u.derivs(xs[0][k], y[k]).0 * ts[0][k];
            }
        }
        Op::Add => {
            for k in 0..out.len() {
                out[k] = ts[0][k] + ts[1][k];
            }
        }
        Op::Mul => {
            for k in 0..out.len() {
                out[k] = ts[0][k] * xs[1][k] + xs[0][k] * ts[1][k];
            }
        }
        Op::Sum => out[0] = ts[0].iter().sum(),
        Op::Dot => {
            out[0] = (0..xs[0].len())
                .map(|k| ts[0][k] * xs[1][k] + xs[0][k] * ts[1][k])
                .sum()
        }
        Op::Affine { rows, cols } => {
            let (w, x) = (xs[0], xs[1]);
            let (tw, tx, tb) = (ts[0], ts[1], ts[2]);
            for r in 0..rows {
                let mut acc = tb[r];
                for c in 0..cols {
                    acc += tw[r * cols + c] * x[c] + w[r * cols + c] * tx[c];
                }
                out[r] = acc;
            }
        }
        Op::Scale => {
            let (s, ts_) = (xs[1][0], ts[1][0]);
            for k in 0..out.len() {
                out[k] = ts_ * xs[0][k] + s * ts[0][k];
            }
        }
        Op::Concat => {
            let mut c = 0;
            for part in ts {
                out[c..c + part.len()].copy_from_slice(part);
                c += part.len();
            }
        }
        Op::Slice { start } => {
            let len = out.len();
            out.copy_from_slice(&ts[0][start..start + len]);
        }
        Op::AvgPool {
            channels,
            ny,
            nx,
            factor,
        } => pool_forward(ts[0], out, channels, ny, nx, factor),
        Op::Conv {
            cin,
            cout,
            ny,
            nx,
            kernel,
        } => {
            let s = ConvShape {
                cin,
                cout,
                ny,
                nx,
                kernel,
            };
            conv_forward(ts[0], xs[1], s, out);
            conv_accumulate(xs[0], ts[1], s, out);
            for co in 0..cout {
                let b = ts[2][co];
                for o in &mut out[co * ny * nx..(co + 1) * ny * nx] {
                    *o += b;
                }
            }
        }
    }
}

struct DualCtx<'a> {
    tan: &'a [f64],
    tg: &'a [f64],
    tadj: &'a mut [f64],
}

fn range(tape: &Tape, node: usize) -> core::ops::Range<usize> {
    let n = &tape.nodes[node];
    n.offset..n.offset + n.len
}

/// Propagates the output adjoint `g` (and its tangent, if `dual`) to the
/// inputs of one node.
fn backward_op(
    tape: &Tape,
    op: Op,
    args: &[usize],
    y: &[f64],
    g: &[f64],
    adj: &mut [f64],
    dual: Option<DualCtx<'_>>,
) {
    let vals = &tape.values;
    match op {
        Op::Leaf(_) => {}
        Op::Unary(u) => {
            let ra = range(tape, args[0]);
            let x = &vals[ra.clone()];
            match dual {
                None => {
                    for k in 0..g.len() {
                        adj[ra.start + k] += g[k] * u.derivs(x[k], y[k]).0;
                    }
                }
                Some(d) => {
                    let tx = &d.tan[ra.clone()];
                    for k in 0..g.len() {
                        let (d1, d2) = u.derivs(x[k], y[k]);
                        adj[ra.start + k] += g[k] * d1;
                        d.tadj[ra.start + k] += d.tg[k] * d1 + g[k] * d2 * tx[k];
                    }
                }
            }
        }
        Op::Add => {
            for &a in args {
                let ra = range(tape, a);
                for k in 0..g.len() {
                    adj[ra.start + k] += g[k];
                }
            }
            if let Some(d) = dual {
                for &a in args {
                    let ra = range(tape, a);
                    for k in 0..g.len() {
                        d.tadj[ra.start + k] += d.tg[k];
                    }
                }
            }
        }
        Op::Mul => {
            let (ra, rb) = (range(tape, args[0]), range(tape, args[1]));
            let a: Vec<f64> = vals[ra.clone()].to_vec();
            let b: Vec<f64> = vals[rb.clone()].to_vec();
            for k in 0..g.len() {
                adj[ra.start + k] += g[k] * b[k];
                adj[rb.start + k] += g[k] * a[k];
            }
            if let Some(d) = dual {
                let ta: Vec<f64> = d.tan[ra.clone()].to_vec();
                let tb: Vec<f64> = d.tan[rb.clone()].to_vec();
                for k in 0..g.len() {
                    d.tadj[ra.start + k] += d.tg[k] * b[k] + g[k] * tb[k];
                    d.tadj[rb.start + k] += d.tg[k] * a[k] + g[k] * ta[k];
                }
            }
        }
        Op::Sum => {
            let ra = range(tape, args[0]);
            for k in ra.clone() {
                adj[k] += g[0];
            }
            if let Some(d) = dual {
                for k in ra {
                    d.tadj[k] += d.tg[0];
                }
            }
        }
        Op::Dot => {
            let (ra, rb) = (range(tape, args[0]), range(tape, args[1]));
            let a: Vec<f64> = vals[ra.clone()].to_vec();
            let b: Vec<f64> = vals[rb.clone()].to_vec();
            for k in 0..a.len() {
                adj[ra.start + k] += g[0] * b[k];
                adj[rb.start + k] += g[0] * a[k];
            }
            if let Some(d) = dual {
                let ta: Vec<f64> = d.tan[ra.clone()].to_vec();
                let tb: Vec<f64> = d.tan[rb.clone()].to_vec();
                for k in 0..a.len() {
                    d.tadj[ra.start + k] += d.tg[0] * b[k] + g[0] * tb[k];
                    d.tadj[rb.start + k] += d.tg[0] * a[k] + g[0] * ta[k];
                }
            }
        }
        Op::Affine { rows, cols } => {
            let (rw, rx, rb) = (range(tape, args[0]), range(tape, args[1]), range(tape, args[2]));
            let w = &vals[rw.clone()];
            let x = &vals[rx.clone()];
            let mut gx = vec![0.0; cols];
            for r in 0..rows {
                let gr = g[r];
                if gr == 0.0 {
                    continue;
                }
                let wrow = &w[r * cols..(r + 1) * cols];
                for c in 0..cols {
                    gx[c] += wrow[c] * gr;
                }
            }
            for r in 0..rows {
                let gr = g[r];
                let base = rw.start + r * cols;
                for c in 0..cols {
                    adj[base + c] += gr * x[c];
                }
                adj[rb.start + r] += gr;
            }
            for c in 0..cols {
                adj[rx.start + c] += gx[c];
            }
            if let Some(d) = dual {
                let tw = &d.tan[rw.clone()];
                let tx = &d.tan[rx.clone()];
                let mut tgx = vec![0.0; cols];
                for r in 0..rows {
                    let (gr, tgr) = (g[r], d.tg[r]);
                    let wrow = &w[r * cols..(r + 1) * cols];
                    let twrow = &tw[r * cols..(r + 1) * cols];
                    for c in 0..cols {
                        tgx[c] += wrow[c] * tgr + twrow[c] * gr;
                    }
                    let base = rw.start + r * cols;
                    for c in 0..cols {
                        d.tadj[base + c] += tgr * x[c] + gr * tx[c];
                    }
                    d.tadj[rb.start + r] += tgr;
                }
                for c in 0..cols {
                    d.tadj[rx.start + c] += tgx[c];
                }
            }
        }
        Op::Scale => {
            let (ra, rs) = (range(tape, args[0]), range(tape, args[1]));
            let a: Vec<f64> = vals[ra.clone()].to_vec();
            let s = vals[rs.start];
            let mut gs = 0.0;
            for k in 0..g.len() {
                adj[ra.start + k] += s * g[k];
                gs += g[k] * a[k];
            }
            adj[rs.start] += gs;
            if let Some(d) = dual {
                let ta: Vec<f64> = d.tan[ra.clone()].to_vec();
                let ts = d.tan[rs.start];
                let mut tgs = 0.0;
                for k in 0..g.len() {
                    d.tadj[ra.start + k] += s * d.tg[k] + ts * g[k];
                    tgs += d.tg[k] * a[k] + g[k] * ta[k];
                }
                d.tadj[rs.start] += tgs;
            }
        }
        Op::Concat => {
            let mut c = 0;
            for &a in args {
                let ra = range(tape, a);
                let l = ra.len();
                for k in 0..l {
                    adj[ra.start + k] += g[c + k];
                }
                c += l;
            }
            if let Some(d) = dual {
                let mut c = 0;
                for &a in args {
                    let ra = range(tape, a);
                    let l = ra.len();
                    for k in 0..l {
                        d.tadj[ra.start + k] += d.tg[c + k];
                    }
                    c += l;
                }
            }
        }
        Op::Slice { start } => {
            let ra = range(tape, args[0]);
            for k in 0..g.len() {
                adj[ra.start + start + k] += g[k];
            }
            if let Some(d) = dual {
                for k in 0..g.len() {
                    d.tadj[ra.start + start + k] += d.tg[k];
                }
            }
        }
        Op::AvgPool {
            channels,
            ny,
            nx,
            factor,
        } => {
            let ra = range(tape, args[0]);
            pool_backward(g, &mut adj[ra.clone()], channels, ny, nx, factor);
            if let Some(d) = dual {
                pool_backward(d.tg, &mut d.tadj[ra], channels, ny, nx, factor);
            }
        }
        Op::Conv {
            cin,
            cout,
            ny,
            nx,
            kernel,
        } => {
            let s = ConvShape {
                cin,
                cout,
                ny,
                nx,
                kernel,
            };
            let (rx, rw, rb) = (range(tape, args[0]), range(tape, args[1]), range(tape, args[2]));
            let x = &vals[rx.clone()];
            let w = &vals[rw.clone()];
            let plane = ny * nx;
            conv_input_adjoint(g, w, s, &mut adj[rx.clone()]);
            conv_weight_adjoint(g, x, s, &mut adj[rw.clone()]);
            for co in 0..cout {
                adj[rb.start + co] += g[co * plane..(co + 1) * plane].iter().sum::<f64>();
            }
            if let Some(d) = dual {
                let tx = &d.tan[rx.clone()];
                let tw = &d.tan[rw.clone()];
                conv_input_adjoint(d.tg, w, s, &mut d.tadj[rx.clone()]);
                conv_input_adjoint(g, tw, s, &mut d.tadj[rx.clone()]);
                conv_weight_adjoint(d.tg, x, s, &mut d.tadj[rw.clone()]);
                conv_weight_adjoint(g, tx, s, &mut d.tadj[rw.clone()]);
                for co in 0..cout {
                    d.tadj[rb.start + co] += d.tg[co * plane..(co + 1) * plane].iter().sum::<f64>();
                }
            }
        }
    }
}
