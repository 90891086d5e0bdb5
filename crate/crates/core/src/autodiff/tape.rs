//! Reverse-mode automatic differentiation on an append-only tape.
//!
//! Nodes hold row-major `f64` buffers: scalars are 1×1, a mini-batch of
//! per-sample values is a 1×n row, network parameters are m×k leaves. Every
//! operation appends one node whose inputs have strictly smaller indices, so
//! a single reverse sweep visits each node exactly once.
//!
//! Node values live in one bump arena per tape, and arenas are recycled
//! through a thread-local pool when tapes (or gradient sets) are dropped:
//! a worker that builds one tape per batch chunk touches freshly mapped
//! pages only on its first rollout.
//!
//! A tape is built, differentiated and dropped by one worker; tapes for
//! different batch chunks are independent.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::ops;
use std::sync::atomic::{AtomicU64, Ordering};

use super::gemm::{gemm_nn_acc, transpose_into};
use crate::error::{Error, Result};

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

thread_local! {
    static BUFFER_POOL: RefCell<Vec<Vec<f64>>> = const { RefCell::new(Vec::new()) };
}

fn pool_get() -> Vec<f64> {
    BUFFER_POOL.with(|pool| pool.borrow_mut().pop().unwrap_or_default())
}

fn pool_put(mut buf: Vec<f64>) {
    buf.clear();
    BUFFER_POOL.with(|pool| {
        let mut pool = pool.borrow_mut();
        if pool.len() < 8 {
            pool.push(buf);
        }
    });
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Neg(usize),
    Relu(usize),
    Abs(usize),
    Square(usize),
    Scale(usize, f64),
    #[allow(dead_code)] // the constant is part of the record, not of backward
    AddConst(usize, f64),
    /// `w (m×k) · x (k×n) + b (m×1)` broadcast over columns.
    Affine { w: usize, x: usize, b: usize },
    /// Affine followed by ReLU in one node; hidden layers use this to keep
    /// the arena small.
    AffineRelu { w: usize, x: usize, b: usize },
    /// Stack 1×n rows into a k×n matrix.
    StackRows(Vec<usize>),
    /// Sum of all elements, yielding a 1×1 node.
    Sum(usize),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::Neg(..) => "neg",
            Op::Relu(..) => "relu",
            Op::Abs(..) => "abs",
            Op::Square(..) => "square",
            Op::Scale(..) => "scale",
            Op::AddConst(..) => "add_const",
            Op::Affine { .. } => "affine",
            Op::AffineRelu { .. } => "affine_relu",
            Op::StackRows(..) => "stack_rows",
            Op::Sum(..) => "sum",
        }
    }
}

#[derive(Debug)]
struct Node {
    op: Op,
    rows: usize,
    cols: usize,
    /// Offset of this node's value in the tape arena.
    off: usize,
}

impl Node {
    fn len(&self) -> usize {
        self.rows * self.cols
    }
}

fn node_value<'a>(arena: &'a [f64], node: &Node) -> &'a [f64] {
    &arena[node.off..node.off + node.len()]
}

/// Recording tape. Build a graph with the `Var` handles it hands out, then
/// call [`Tape::backward`] on a scalar output.
pub struct Tape {
    id: u64,
    nodes: RefCell<Vec<Node>>,
    arena: RefCell<Vec<f64>>,
    flops: RefCell<u64>,
}

/// Handle to one tape node.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: usize,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var(#{} on tape {})", self.index, self.tape.id)
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Drop for Tape {
    fn drop(&mut self) {
        pool_put(std::mem::take(self.arena.get_mut()));
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: RefCell::new(Vec::new()),
            arena: RefCell::new(pool_get()),
            flops: RefCell::new(0),
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.borrow().len()
    }

    /// Rough floating-point operation count recorded so far (forward only).
    pub fn flops(&self) -> u64 {
        *self.flops.borrow()
    }

    /// Append a node, computing its value in place at the end of the arena.
    /// `fill` sees the earlier arena contents and the (zeroed) output slice.
    fn push_with<F>(&self, op: Op, rows: usize, cols: usize, fill: F) -> Result<Var<'_>>
    where
        F: FnOnce(&[Node], &[f64], &mut [f64]),
    {
        let len = rows * cols;
        {
            let nodes = self.nodes.borrow();
            let mut arena = self.arena.borrow_mut();
            let off = arena.len();
            arena.resize(off + len, 0.0);
            let (head, out) = arena.split_at_mut(off);
            fill(&nodes, head, out);
            if !out.iter().all(|v| v.is_finite()) {
                let name = op.name();
                drop((head, out));
                arena.truncate(off);
                return Err(Error::Numeric(format!(
                    "op `{name}` produced a non-finite value"
                )));
            }
        }
        let mut nodes = self.nodes.borrow_mut();
        let index = nodes.len();
        let off = self.arena.borrow().len() - len;
        nodes.push(Node { op, rows, cols, off });
        Ok(Var { tape: self, index })
    }

    fn check_same_tape(&self, inputs: &[Var<'_>]) -> Result<()> {
        for v in inputs {
            if v.tape.id != self.id {
                return Err(Error::Usage(
                    "inputs recorded on different tapes cannot be mixed".into(),
                ));
            }
        }
        Ok(())
    }

    fn shape_of(&self, v: Var<'_>) -> (usize, usize) {
        let nodes = self.nodes.borrow();
        (nodes[v.index].rows, nodes[v.index].cols)
    }

    /// Scalar leaf (1×1).
    pub fn scalar(&self, v: f64) -> Result<Var<'_>> {
        self.push_with(Op::Leaf, 1, 1, |_, _, out| out[0] = v)
    }

    /// Row leaf (1×n), one entry per batch element.
    pub fn row(&self, values: &[f64]) -> Result<Var<'_>> {
        self.push_with(Op::Leaf, 1, values.len(), |_, _, out| out.copy_from_slice(values))
    }

    /// Matrix leaf (rows×cols, row-major). Used for parameter blocks.
    pub fn matrix(&self, rows: usize, cols: usize, values: &[f64]) -> Result<Var<'_>> {
        if values.len() != rows * cols {
            return Err(Error::Usage(format!(
                "matrix leaf expects {}x{}={} values, got {}",
                rows,
                cols,
                rows * cols,
                values.len()
            )));
        }
        self.push_with(Op::Leaf, rows, cols, |_, _, out| out.copy_from_slice(values))
    }

    fn binary(&self, make: fn(usize, usize) -> Op, a: Var<'_>, b: Var<'_>) -> Result<Var<'_>> {
        self.check_same_tape(&[a, b])?;
        let (rows, cols) = {
            let nodes = self.nodes.borrow();
            let (na, nb) = (&nodes[a.index], &nodes[b.index]);
            if na.rows != nb.rows || na.cols != nb.cols {
                return Err(Error::Usage(format!(
                    "elementwise op on mismatched shapes {}x{} vs {}x{}",
                    na.rows, na.cols, nb.rows, nb.cols
                )));
            }
            (na.rows, na.cols)
        };
        *self.flops.borrow_mut() += (rows * cols) as u64;
        let op = make(a.index, b.index);
        self.push_with(op, rows, cols, |nodes, head, out| {
            let va = node_value(head, &nodes[a.index]);
            let vb = node_value(head, &nodes[b.index]);
            match make(0, 0) {
                Op::Add(..) => {
                    for i in 0..out.len() {
                        out[i] = va[i] + vb[i];
                    }
                }
                Op::Sub(..) => {
                    for i in 0..out.len() {
                        out[i] = va[i] - vb[i];
                    }
                }
                Op::Mul(..) => {
                    for i in 0..out.len() {
                        out[i] = va[i] * vb[i];
                    }
                }
                Op::Div(..) => {
                    for i in 0..out.len() {
                        out[i] = va[i] / vb[i];
                    }
                }
                _ => unreachable!(),
            }
        })
    }

    pub fn add(&self, a: Var<'_>, b: Var<'_>) -> Result<Var<'_>> {
        self.binary(Op::Add, a, b)
    }

    pub fn sub(&self, a: Var<'_>, b: Var<'_>) -> Result<Var<'_>> {
        self.binary(Op::Sub, a, b)
    }

    pub fn mul(&self, a: Var<'_>, b: Var<'_>) -> Result<Var<'_>> {
        self.binary(Op::Mul, a, b)
    }

    pub fn div(&self, a: Var<'_>, b: Var<'_>) -> Result<Var<'_>> {
        self.binary(Op::Div, a, b)
    }

    fn unary(&self, a: Var<'_>, op: Op, f: impl Fn(f64) -> f64) -> Result<Var<'_>> {
        self.check_same_tape(&[a])?;
        let (rows, cols) = self.shape_of(a);
        *self.flops.borrow_mut() += (rows * cols) as u64;
        self.push_with(op, rows, cols, |nodes, head, out| {
            let va = node_value(head, &nodes[a.index]);
            for i in 0..out.len() {
                out[i] = f(va[i]);
            }
        })
    }

    pub fn neg(&self, a: Var<'_>) -> Result<Var<'_>> {
        self.unary(a, Op::Neg(a.index), |x| -x)
    }

    pub fn relu(&self, a: Var<'_>) -> Result<Var<'_>> {
        self.unary(a, Op::Relu(a.index), |x| if x > 0.0 { x } else { 0.0 })
    }

    pub fn abs(&self, a: Var<'_>) -> Result<Var<'_>> {
        self.unary(a, Op::Abs(a.index), f64::abs)
    }

    pub fn square(&self, a: Var<'_>) -> Result<Var<'_>> {
        self.unary(a, Op::Square(a.index), |x| x * x)
    }

    pub fn scale(&self, a: Var<'_>, c: f64) -> Result<Var<'_>> {
        self.unary(a, Op::Scale(a.index, c), |x| c * x)
    }

    pub fn add_const(&self, a: Var<'_>, c: f64) -> Result<Var<'_>> {
        self.unary(a, Op::AddConst(a.index, c), |x| x + c)
    }

    /// Dense layer: `w (m×k) · x (k×n) + b (m×1)`, bias broadcast across
    /// columns. One backward pass through this node yields the gradients of
    /// the whole parameter block.
    pub fn affine(&self, w: Var<'_>, x: Var<'_>, b: Var<'_>) -> Result<Var<'_>> {
        self.affine_inner(w, x, b, false)
    }

    /// Dense layer with a fused ReLU on the output.
    pub fn affine_relu(&self, w: Var<'_>, x: Var<'_>, b: Var<'_>) -> Result<Var<'_>> {
        self.affine_inner(w, x, b, true)
    }

    fn affine_inner(&self, w: Var<'_>, x: Var<'_>, b: Var<'_>, relu: bool) -> Result<Var<'_>> {
        self.check_same_tape(&[w, x, b])?;
        let (m, k, n) = {
            let nodes = self.nodes.borrow();
            let (nw, nx, nb) = (&nodes[w.index], &nodes[x.index], &nodes[b.index]);
            if nw.cols != nx.rows {
                return Err(Error::Usage(format!(
                    "affine: weight is {}x{} but input has {} rows",
                    nw.rows, nw.cols, nx.rows
                )));
            }
            if nb.rows != nw.rows || nb.cols != 1 {
                return Err(Error::Usage(format!(
                    "affine: bias must be {}x1, got {}x{}",
                    nw.rows, nb.rows, nb.cols
                )));
            }
            (nw.rows, nw.cols, nx.cols)
        };
        *self.flops.borrow_mut() += 2 * (m * k * n) as u64;
        let op = if relu {
            Op::AffineRelu { w: w.index, x: x.index, b: b.index }
        } else {
            Op::Affine { w: w.index, x: x.index, b: b.index }
        };
        self.push_with(op, m, n, |nodes, head, out| {
            let wv = node_value(head, &nodes[w.index]);
            let xv = node_value(head, &nodes[x.index]);
            let bv = node_value(head, &nodes[b.index]);
            for i in 0..m {
                out[i * n..(i + 1) * n].fill(bv[i]);
            }
            gemm_nn_acc(out, wv, xv, m, k, n);
            if relu {
                for v in out.iter_mut() {
                    if !(*v > 0.0) {
                        *v = 0.0;
                    }
                }
            }
        })
    }

    /// Stack 1×n rows into a k×n matrix (feature assembly for a batch).
    pub fn stack_rows(&self, rows: &[Var<'_>]) -> Result<Var<'_>> {
        if rows.is_empty() {
            return Err(Error::Usage("stack_rows needs at least one row".into()));
        }
        self.check_same_tape(rows)?;
        let n = {
            let nodes = self.nodes.borrow();
            let n = nodes[rows[0].index].cols;
            for r in rows {
                let node = &nodes[r.index];
                if node.rows != 1 || node.cols != n {
                    return Err(Error::Usage(format!(
                        "stack_rows expects 1x{} rows, got {}x{}",
                        n, node.rows, node.cols
                    )));
                }
            }
            n
        };
        let indices: Vec<usize> = rows.iter().map(|r| r.index).collect();
        self.push_with(Op::StackRows(indices), rows.len(), n, |nodes, head, out| {
            for (r, var) in rows.iter().enumerate() {
                let src = node_value(head, &nodes[var.index]);
                out[r * n..(r + 1) * n].copy_from_slice(src);
            }
        })
    }

    /// Sum of every element, as a 1×1 node.
    pub fn sum(&self, a: Var<'_>) -> Result<Var<'_>> {
        self.check_same_tape(&[a])?;
        let (rows, cols) = self.shape_of(a);
        *self.flops.borrow_mut() += (rows * cols) as u64;
        self.push_with(Op::Sum(a.index), 1, 1, |nodes, head, out| {
            out[0] = node_value(head, &nodes[a.index]).iter().sum();
        })
    }

    pub fn shape(&self, v: Var<'_>) -> (usize, usize) {
        self.shape_of(v)
    }

    pub fn value_vec(&self, v: Var<'_>) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let arena = self.arena.borrow();
        node_value(&arena, &nodes[v.index]).to_vec()
    }

    /// Reverse sweep from a scalar output. Returns the gradient of the output
    /// with respect to every node; nodes not on a path to the output read 0.
    pub fn backward(&self, output: Var<'_>) -> Result<Gradients> {
        self.check_same_tape(&[output])?;
        let nodes = self.nodes.borrow();
        let out_node = &nodes[output.index];
        if out_node.len() != 1 {
            return Err(Error::Usage(format!(
                "backward requires a scalar output, got {}x{}",
                out_node.rows, out_node.cols
            )));
        }
        let varena = self.arena.borrow();
        // Gradient buffers live in their own bump arena, allocated when a
        // node is first reached.
        let mut garena = pool_get();
        let mut entries: Vec<Option<(usize, usize)>> = vec![None; nodes.len()];
        let ensure = |garena: &mut Vec<f64>,
                      entries: &mut Vec<Option<(usize, usize)>>,
                      idx: usize,
                      len: usize|
         -> usize {
            match entries[idx] {
                Some((off, _)) => off,
                None => {
                    let off = garena.len();
                    garena.resize(off + len, 0.0);
                    entries[idx] = Some((off, len));
                    off
                }
            }
        };

        let seed = ensure(&mut garena, &mut entries, output.index, 1);
        garena[seed] = 1.0;

        // Scratch for the (possibly ReLU-masked) upstream gradient at dense
        // layers; elementwise ops read and write disjoint arena regions
        // directly.
        let mut gbuf = pool_get();
        // Transposed weight matrices, computed once per parameter block.
        let mut wt_cache: HashMap<usize, Vec<f64>> = HashMap::new();

        for idx in (0..=output.index).rev() {
            let Some((goff, glen)) = entries[idx] else { continue };
            let node = &nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    for &target in &[*a, *b] {
                        let toff = ensure(&mut garena, &mut entries, target, glen);
                        let (g, t) = grad_pair(&mut garena, goff, glen, toff, glen);
                        for i in 0..glen {
                            t[i] += g[i];
                        }
                    }
                }
                Op::Sub(a, b) => {
                    let toff = ensure(&mut garena, &mut entries, *a, glen);
                    let (g, t) = grad_pair(&mut garena, goff, glen, toff, glen);
                    for i in 0..glen {
                        t[i] += g[i];
                    }
                    let toff = ensure(&mut garena, &mut entries, *b, glen);
                    let (g, t) = grad_pair(&mut garena, goff, glen, toff, glen);
                    for i in 0..glen {
                        t[i] -= g[i];
                    }
                }
                Op::Mul(a, b) => {
                    let va = node_value(&varena, &nodes[*a]);
                    let vb = node_value(&varena, &nodes[*b]);
                    let toff = ensure(&mut garena, &mut entries, *a, glen);
                    let (g, t) = grad_pair(&mut garena, goff, glen, toff, glen);
                    for i in 0..glen {
                        t[i] += g[i] * vb[i];
                    }
                    let toff = ensure(&mut garena, &mut entries, *b, glen);
                    let (g, t) = grad_pair(&mut garena, goff, glen, toff, glen);
                    for i in 0..glen {
                        t[i] += g[i] * va[i];
                    }
                }
                Op::Div(a, b) => {
                    let va = node_value(&varena, &nodes[*a]);
                    let vb = node_value(&varena, &nodes[*b]);
                    let toff = ensure(&mut garena, &mut entries, *a, glen);
                    let (g, t) = grad_pair(&mut garena, goff, glen, toff, glen);
                    for i in 0..glen {
                        t[i] += g[i] / vb[i];
                    }
                    let toff = ensure(&mut garena, &mut entries, *b, glen);
                    let (g, t) = grad_pair(&mut garena, goff, glen, toff, glen);
                    for i in 0..glen {
                        t[i] -= g[i] * va[i] / (vb[i] * vb[i]);
                    }
                }
                Op::Neg(a) => {
                    let toff = ensure(&mut garena, &mut entries, *a, glen);
                    let (g, t) = grad_pair(&mut garena, goff, glen, toff, glen);
                    for i in 0..glen {
                        t[i] -= g[i];
                    }
                }
                Op::Relu(a) => {
                    // d relu / dx = 0 at the kink (x = 0).
                    let va = node_value(&varena, &nodes[*a]);
                    let toff = ensure(&mut garena, &mut entries, *a, glen);
                    let (g, t) = grad_pair(&mut garena, goff, glen, toff, glen);
                    for i in 0..glen {
                        if va[i] > 0.0 {
                            t[i] += g[i];
                        }
                    }
                }
                Op::Abs(a) => {
                    // d|x|/dx = 0 at x = 0.
                    let va = node_value(&varena, &nodes[*a]);
                    let toff = ensure(&mut garena, &mut entries, *a, glen);
                    let (g, t) = grad_pair(&mut garena, goff, glen, toff, glen);
                    for i in 0..glen {
                        if va[i] > 0.0 {
                            t[i] += g[i];
                        } else if va[i] < 0.0 {
                            t[i] -= g[i];
                        }
                    }
                }
                Op::Square(a) => {
                    let va = node_value(&varena, &nodes[*a]);
                    let toff = ensure(&mut garena, &mut entries, *a, glen);
                    let (g, t) = grad_pair(&mut garena, goff, glen, toff, glen);
                    for i in 0..glen {
                        t[i] += 2.0 * va[i] * g[i];
                    }
                }
                Op::Scale(a, c) => {
                    let c = *c;
                    let toff = ensure(&mut garena, &mut entries, *a, glen);
                    let (g, t) = grad_pair(&mut garena, goff, glen, toff, glen);
                    for i in 0..glen {
                        t[i] += c * g[i];
                    }
                }
                Op::AddConst(a, _) => {
                    let toff = ensure(&mut garena, &mut entries, *a, glen);
                    let (g, t) = grad_pair(&mut garena, goff, glen, toff, glen);
                    for i in 0..glen {
                        t[i] += g[i];
                    }
                }
                Op::Affine { w, x, b } | Op::AffineRelu { w, x, b } => {
                    let (m, n) = (node.rows, node.cols);
                    let k = nodes[*w].cols;
                    // Upstream gradient, masked by the ReLU when fused. The
                    // mask can read this node's own output: post-ReLU zero
                    // means the pre-activation was not positive.
                    gbuf.clear();
                    gbuf.reserve(glen);
                    if matches!(node.op, Op::AffineRelu { .. }) {
                        let ov = node_value(&varena, node);
                        for i in 0..glen {
                            gbuf.push(if ov[i] > 0.0 { garena[goff + i] } else { 0.0 });
                        }
                    } else {
                        gbuf.extend_from_slice(&garena[goff..goff + glen]);
                    }
                    // dW += g · xᵀ
                    {
                        let xv = node_value(&varena, &nodes[*x]);
                        let mut xt = pool_get();
                        transpose_into(&mut xt, xv, k, n);
                        let toff = ensure(&mut garena, &mut entries, *w, m * k);
                        gemm_nn_acc(&mut garena[toff..toff + m * k], &gbuf, &xt, m, n, k);
                        pool_put(xt);
                    }
                    // dx += wᵀ · g
                    {
                        let wt = wt_cache.entry(*w).or_insert_with(|| {
                            let wv = node_value(&varena, &nodes[*w]);
                            let mut wt = pool_get();
                            wt.resize(m * k, 0.0);
                            for r in 0..m {
                                for cidx in 0..k {
                                    wt[cidx * m + r] = wv[r * k + cidx];
                                }
                            }
                            wt
                        });
                        let toff = ensure(&mut garena, &mut entries, *x, k * n);
                        gemm_nn_acc(&mut garena[toff..toff + k * n], wt, &gbuf, k, m, n);
                    }
                    // db += row sums of g
                    {
                        let toff = ensure(&mut garena, &mut entries, *b, m);
                        for i in 0..m {
                            garena[toff + i] += gbuf[i * n..(i + 1) * n].iter().sum::<f64>();
                        }
                    }
                }
                Op::StackRows(inputs) => {
                    let n = node.cols;
                    for (r, &inp) in inputs.iter().enumerate() {
                        let toff = ensure(&mut garena, &mut entries, inp, n);
                        let (g, t) = grad_pair(&mut garena, goff, glen, toff, n);
                        for i in 0..n {
                            t[i] += g[r * n + i];
                        }
                    }
                }
                Op::Sum(a) => {
                    let gs = garena[goff];
                    let len = nodes[*a].len();
                    let toff = ensure(&mut garena, &mut entries, *a, len);
                    for i in 0..len {
                        garena[toff + i] += gs;
                    }
                }
            }
        }
        pool_put(gbuf);
        for (_, wt) in wt_cache.drain() {
            pool_put(wt);
        }
        Ok(Gradients { tape_id: self.id, entries, arena: garena })
    }
}

/// Disjoint views into the gradient arena: the upstream gradient (read) and
/// one target buffer (write). Regions never overlap because the arena only
/// ever hands out fresh ranges.
fn grad_pair(
    garena: &mut [f64],
    goff: usize,
    glen: usize,
    toff: usize,
    tlen: usize,
) -> (&[f64], &mut [f64]) {
    if toff >= goff + glen {
        let (head, tail) = garena.split_at_mut(toff);
        (&head[goff..goff + glen], &mut tail[..tlen])
    } else {
        debug_assert!(goff >= toff + tlen);
        let (head, tail) = garena.split_at_mut(goff);
        (&tail[..glen], &mut head[toff..toff + tlen])
    }
}

/// Result of a backward pass. Owns its gradient arena; dropping it returns
/// the buffer to the thread-local pool.
pub struct Gradients {
    tape_id: u64,
    entries: Vec<Option<(usize, usize)>>,
    arena: Vec<f64>,
}

impl Drop for Gradients {
    fn drop(&mut self) {
        pool_put(std::mem::take(&mut self.arena));
    }
}

impl Gradients {
    /// Gradient buffer for a node, if any path reached it.
    pub fn wrt(&self, v: Var<'_>) -> Option<&[f64]> {
        assert_eq!(v.tape.id, self.tape_id, "gradient query from a different tape");
        self.entries[v.index].map(|(off, len)| &self.arena[off..off + len])
    }

    /// Scalar gradient (0 when the node does not influence the output).
    pub fn scalar(&self, v: Var<'_>) -> f64 {
        self.wrt(v).map_or(0.0, |g| g[0])
    }

    /// Dense gradient, zero-filled when the node is unreachable.
    pub fn dense(&self, v: Var<'_>) -> Vec<f64> {
        match self.wrt(v) {
            Some(g) => g.to_vec(),
            None => {
                let (r, c) = v.tape.shape(v);
                vec![0.0; r * c]
            }
        }
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    /// Value of a scalar node.
    pub fn value(&self) -> f64 {
        let nodes = self.tape.nodes.borrow();
        let node = &nodes[self.index];
        assert_eq!(node.len(), 1, "value() on a non-scalar node");
        self.tape.arena.borrow()[node.off]
    }

    pub fn values(&self) -> Vec<f64> {
        self.tape.value_vec(*self)
    }

    pub fn relu(self) -> Result<Var<'t>> {
        self.tape.relu(self)
    }

    pub fn abs(self) -> Result<Var<'t>> {
        self.tape.abs(self)
    }

    pub fn square(self) -> Result<Var<'t>> {
        self.tape.square(self)
    }

    pub fn scale(self, c: f64) -> Result<Var<'t>> {
        self.tape.scale(self, c)
    }

    pub fn add_const(self, c: f64) -> Result<Var<'t>> {
        self.tape.add_const(self, c)
    }

    pub fn sum(self) -> Result<Var<'t>> {
        self.tape.sum(self)
    }
}

// Operator sugar for hand-written graphs (tests, composed expressions).
// These panic on usage/numeric errors; use the `Tape` methods for fallible
// recording.
impl<'t> ops::Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.tape.add(self, rhs).expect("add failed")
    }
}

impl<'t> ops::Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.tape.sub(self, rhs).expect("sub failed")
    }
}

impl<'t> ops::Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        self.tape.mul(self, rhs).expect("mul failed")
    }
}

impl<'t> ops::Div for Var<'t> {
    type Output = Var<'t>;
    fn div(self, rhs: Var<'t>) -> Var<'t> {
        self.tape.div(self, rhs).expect("div failed")
    }
}

impl<'t> ops::Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.tape.neg(self).expect("neg failed")
    }
}

impl<'t> ops::Mul<f64> for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: f64) -> Var<'t> {
        self.tape.scale(self, rhs).expect("scale failed")
    }
}

impl<'t> ops::Add<f64> for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: f64) -> Var<'t> {
        self.tape.add_const(self, rhs).expect("add_const failed")
    }
}
