//! Reverse-mode tape. Every primitive records its inputs and a closure
//! computing the vector-Jacobian product; `backward` walks the tape in
//! reverse topological order (which is construction order).
//!
//! Convention: all recorded values are matrices. Scalars are [1,1] and
//! vectors are row vectors [1,n].

use super::tensor::Tensor;
use super::AutodiffError;

pub const LOG_EPS: f64 = 1e-9;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

type Vjp = Box<dyn Fn(&Tensor) -> Vec<Tensor>>;

struct Node {
    value: Tensor,
    parents: Vec<NodeId>,
    vjp: Option<Vjp>,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor, parents: Vec<NodeId>, vjp: Option<Vjp>) -> NodeId {
        self.nodes.push(Node { value, parents, vjp });
        NodeId(self.nodes.len() - 1)
    }

    /// Record a leaf (parameter or input). Leaves receive gradients but have
    /// no parents.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(value, vec![], None)
    }

    /// Record a constant. Same as a leaf; callers that never read its
    /// gradient treat it as non-trainable.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, vec![], None)
    }

    fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> AutodiffError {
        AutodiffError::ShapeMismatch {
            op,
            detail: format!("{:?} vs {:?}", a.shape(), b.shape()),
        }
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        let (va, vb) = (self.value(a).clone(), self.value(b).clone());
        let out = va.matmul(&vb)?;
        let vjp: Vjp = Box::new(move |g| {
            let da = g.matmul(&vb.transpose()).expect("matmul vjp");
            let db = va.transpose().matmul(g).expect("matmul vjp");
            vec![da, db]
        });
        Ok(self.push(out, vec![a, b], Some(vjp)))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Self::shape_err("add", va, vb));
        }
        let mut out = va.clone();
        out.add_assign(vb);
        let vjp: Vjp = Box::new(move |g| vec![g.clone(), g.clone()]);
        Ok(self.push(out, vec![a, b], Some(vjp)))
    }

    /// Matrix [r,c] + row vector [1,c], broadcast over rows.
    pub fn add_row(&mut self, m: NodeId, v: NodeId) -> Result<NodeId, AutodiffError> {
        let (vm, vv) = (self.value(m), self.value(v));
        let (r, c) = (vm.rows(), vm.cols());
        if vv.rows() != 1 || vv.cols() != c {
            return Err(Self::shape_err("add_row", vm, vv));
        }
        let mut data = vm.data().to_vec();
        for i in 0..r {
            for j in 0..c {
                data[i * c + j] += vv.data()[j];
            }
        }
        let out = Tensor::matrix(r, c, data)?;
        let vjp: Vjp = Box::new(move |g| {
            let mut dv = vec![0.0; c];
            for i in 0..g.rows() {
                for (acc, &gv) in dv.iter_mut().zip(g.row_slice(i)) {
                    *acc += gv;
                }
            }
            vec![g.clone(), Tensor::row(&dv)]
        });
        Ok(self.push(out, vec![m, v], Some(vjp)))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, AutodiffError> {
        let (va, vb) = (self.value(a).clone(), self.value(b).clone());
        if va.shape() != vb.shape() {
            return Err(Self::shape_err("mul", &va, &vb));
        }
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(x, y)| x * y)
            .collect();
        let out = Tensor::new(va.shape().to_vec(), data)?;
        let vjp: Vjp = Box::new(move |g| {
            let da = Tensor::new(
                g.shape().to_vec(),
                g.data().iter().zip(vb.data()).map(|(x, y)| x * y).collect(),
            )
            .expect("mul vjp");
            let db = Tensor::new(
                g.shape().to_vec(),
                g.data().iter().zip(va.data()).map(|(x, y)| x * y).collect(),
            )
            .expect("mul vjp");
            vec![da, db]
        });
        Ok(self.push(out, vec![a, b], Some(vjp)))
    }

    /// Multiply by a compile-time constant.
    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let out = self.value(a).map(|v| v * c);
        let vjp: Vjp = Box::new(move |g| vec![g.map(|v| v * c)]);
        self.push(out, vec![a], Some(vjp))
    }

    /// Scalar node [1,1] times tensor; gradients flow to both.
    pub fn scale_by(&mut self, s: NodeId, a: NodeId) -> Result<NodeId, AutodiffError> {
        let vs = self.value(s);
        if !vs.is_scalar() {
            return Err(Self::shape_err("scale_by", vs, self.value(a)));
        }
        let sv = vs.scalar_value();
        let va = self.value(a).clone();
        let out = va.map(|v| v * sv);
        let vjp: Vjp = Box::new(move |g| {
            let ds: f64 = g.data().iter().zip(va.data()).map(|(x, y)| x * y).sum();
            vec![Tensor::scalar(ds), g.map(|v| v * sv)]
        });
        Ok(self.push(out, vec![s, a], Some(vjp)))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).transpose();
        let vjp: Vjp = Box::new(move |g| vec![g.transpose()]);
        self.push(out, vec![a], Some(vjp))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let out = self.value(a).map(f64::tanh);
        let cache = out.clone();
        let vjp: Vjp = Box::new(move |g| {
            let d = Tensor::new(
                g.shape().to_vec(),
                g.data()
                    .iter()
                    .zip(cache.data())
                    .map(|(gv, y)| gv * (1.0 - y * y))
                    .collect(),
            )
            .expect("tanh vjp");
            vec![d]
        });
        self.push(out, vec![a], Some(vjp))
    }

    /// Natural log with epsilon clamping of the argument.
    pub fn ln(&mut self, a: NodeId) -> NodeId {
        let va = self.value(a).clone();
        let out = va.map(|v| v.max(LOG_EPS).ln());
        let vjp: Vjp = Box::new(move |g| {
            let d = Tensor::new(
                g.shape().to_vec(),
                g.data()
                    .iter()
                    .zip(va.data())
                    .map(|(gv, &x)| gv / x.max(LOG_EPS))
                    .collect(),
            )
            .expect("ln vjp");
            vec![d]
        });
        self.push(out, vec![a], Some(vjp))
    }

    /// Row-wise softmax (last axis).
    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let va = self.value(a);
        let (r, c) = (va.rows(), va.cols());
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            let row = va.row_slice(i);
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for (o, &x) in data[i * c..(i + 1) * c].iter_mut().zip(row) {
                *o = (x - m).exp();
                z += *o;
            }
            for o in &mut data[i * c..(i + 1) * c] {
                *o /= z;
            }
        }
        let out = Tensor::matrix(r, c, data).expect("softmax");
        let cache = out.clone();
        let vjp: Vjp = Box::new(move |g| {
            let (r, c) = (cache.rows(), cache.cols());
            let mut d = vec![0.0; r * c];
            for i in 0..r {
                let y = cache.row_slice(i);
                let gy = g.row_slice(i);
                let dot: f64 = y.iter().zip(gy).map(|(a, b)| a * b).sum();
                for j in 0..c {
                    d[i * c + j] = y[j] * (gy[j] - dot);
                }
            }
            vec![Tensor::matrix(r, c, d).expect("softmax vjp")]
        });
        self.push(out, vec![a], Some(vjp))
    }

    /// Row lookup into an embedding table; gradient scatter-adds rows.
    pub fn embed(&mut self, table: NodeId, indices: &[usize]) -> Result<NodeId, AutodiffError> {
        let vt = self.value(table);
        let (rows, c) = (vt.rows(), vt.cols());
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(AutodiffError::ShapeMismatch {
                op: "embed",
                detail: format!("index {} out of {} rows", bad, rows),
            });
        }
        let mut data = Vec::with_capacity(indices.len() * c);
        for &i in indices {
            data.extend_from_slice(vt.row_slice(i));
        }
        let out = Tensor::matrix(indices.len(), c, data)?;
        let idx = indices.to_vec();
        let vjp: Vjp = Box::new(move |g| {
            let mut d = Tensor::zeros(&[rows, c]);
            for (k, &i) in idx.iter().enumerate() {
                let src = g.row_slice(k).to_vec();
                let dst = &mut d.data_mut()[i * c..(i + 1) * c];
                for (a, b) in dst.iter_mut().zip(src) {
                    *a += b;
                }
            }
            vec![d]
        });
        Ok(self.push(out, vec![table], Some(vjp)))
    }

    /// Per-row layer normalization with learned gain and bias (both [1,c]).
    pub fn layer_norm(
        &mut self,
        a: NodeId,
        gain: NodeId,
        bias: NodeId,
    ) -> Result<NodeId, AutodiffError> {
        const EPS: f64 = 1e-5;
        let va = self.value(a).clone();
        let vg = self.value(gain).clone();
        let vb = self.value(bias).clone();
        let (r, c) = (va.rows(), va.cols());
        if vg.cols() != c || vb.cols() != c || vg.rows() != 1 || vb.rows() != 1 {
            return Err(Self::shape_err("layer_norm", &va, &vg));
        }
        let mut xhat = vec![0.0; r * c];
        let mut inv_std = vec![0.0; r];
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            let row = va.row_slice(i);
            let mean: f64 = row.iter().sum::<f64>() / c as f64;
            let var: f64 = row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / c as f64;
            let s = 1.0 / (var + EPS).sqrt();
            inv_std[i] = s;
            for j in 0..c {
                let xh = (row[j] - mean) * s;
                xhat[i * c + j] = xh;
                data[i * c + j] = vg.data()[j] * xh + vb.data()[j];
            }
        }
        let out = Tensor::matrix(r, c, data)?;
        let vjp: Vjp = Box::new(move |g| {
            let mut dx = vec![0.0; r * c];
            let mut dg = vec![0.0; c];
            let mut db = vec![0.0; c];
            for i in 0..r {
                let gy = g.row_slice(i);
                let xh = &xhat[i * c..(i + 1) * c];
                let s = inv_std[i];
                let mut sum_t = 0.0;
                let mut sum_tx = 0.0;
                for j in 0..c {
                    let t = gy[j] * vg.data()[j];
                    sum_t += t;
                    sum_tx += t * xh[j];
                    dg[j] += gy[j] * xh[j];
                    db[j] += gy[j];
                }
                let n = c as f64;
                for j in 0..c {
                    let t = gy[j] * vg.data()[j];
                    dx[i * c + j] = s * (t - sum_t / n - xh[j] * sum_tx / n);
                }
            }
            vec![
                Tensor::matrix(r, c, dx).expect("layer_norm vjp"),
                Tensor::row(&dg),
                Tensor::row(&db),
            ]
        });
        Ok(self.push(out, vec![a, gain, bias], Some(vjp)))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let va = self.value(a);
        let shape = va.shape().to_vec();
        let out = Tensor::scalar(va.data().iter().sum());
        let vjp: Vjp = Box::new(move |g| {
            let gv = g.scalar_value();
            let numel: usize = shape.iter().product();
            vec![Tensor::new(shape.clone(), vec![gv; numel]).expect("sum vjp")]
        });
        self.push(out, vec![a], Some(vjp))
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let n = self.value(a).numel() as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Mean over rows: [r,c] -> [1,c]. Used for pooling.
    pub fn mean_rows(&mut self, a: NodeId) -> NodeId {
        let va = self.value(a);
        let (r, c) = (va.rows(), va.cols());
        let mut out = vec![0.0; c];
        for i in 0..r {
            for (o, &x) in out.iter_mut().zip(va.row_slice(i)) {
                *o += x;
            }
        }
        for o in &mut out {
            *o /= r as f64;
        }
        let vjp: Vjp = Box::new(move |g| {
            let mut d = vec![0.0; r * c];
            for i in 0..r {
                for j in 0..c {
                    d[i * c + j] = g.data()[j] / r as f64;
                }
            }
            vec![Tensor::matrix(r, c, d).expect("mean_rows vjp")]
        });
        self.push(Tensor::row(&out), vec![a], Some(vjp))
    }

    /// Column slice [r, start..start+len].
    pub fn slice_cols(
        &mut self,
        a: NodeId,
        start: usize,
        len: usize,
    ) -> Result<NodeId, AutodiffError> {
        let va = self.value(a);
        let (r, c) = (va.rows(), va.cols());
        if start + len > c {
            return Err(AutodiffError::ShapeMismatch {
                op: "slice_cols",
                detail: format!("{}..{} of {} cols", start, start + len, c),
            });
        }
        let mut data = Vec::with_capacity(r * len);
        for i in 0..r {
            data.extend_from_slice(&va.row_slice(i)[start..start + len]);
        }
        let out = Tensor::matrix(r, len, data)?;
        let vjp: Vjp = Box::new(move |g| {
            let mut d = Tensor::zeros(&[r, c]);
            for i in 0..r {
                let src = g.row_slice(i).to_vec();
                d.data_mut()[i * c + start..i * c + start + len].copy_from_slice(&src);
            }
            vec![d]
        });
        Ok(self.push(out, vec![a], Some(vjp)))
    }

    /// Row slice [start..start+len, c].
    pub fn slice_rows(
        &mut self,
        a: NodeId,
        start: usize,
        len: usize,
    ) -> Result<NodeId, AutodiffError> {
        let va = self.value(a);
        let (r, c) = (va.rows(), va.cols());
        if start + len > r {
            return Err(AutodiffError::ShapeMismatch {
                op: "slice_rows",
                detail: format!("{}..{} of {} rows", start, start + len, r),
            });
        }
        let data = va.data()[start * c..(start + len) * c].to_vec();
        let out = Tensor::matrix(len, c, data)?;
        let vjp: Vjp = Box::new(move |g| {
            let mut d = Tensor::zeros(&[r, c]);
            d.data_mut()[start * c..(start + len) * c].copy_from_slice(g.data());
            vec![d]
        });
        Ok(self.push(out, vec![a], Some(vjp)))
    }

    /// Concatenate along columns; all parts must share a row count.
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId, AutodiffError> {
        let r = self.value(parts[0]).rows();
        let widths: Vec<usize> = parts.iter().map(|&p| self.value(p).cols()).collect();
        if parts.iter().any(|&p| self.value(p).rows() != r) {
            return Err(AutodiffError::ShapeMismatch {
                op: "concat_cols",
                detail: "row counts differ".into(),
            });
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(r * total);
        for i in 0..r {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(i));
            }
        }
        let out = Tensor::matrix(r, total, data)?;
        let w = widths.clone();
        let vjp: Vjp = Box::new(move |g| {
            let mut grads: Vec<Tensor> = w.iter().map(|&c| Tensor::zeros(&[r, c])).collect();
            for i in 0..r {
                let mut off = 0;
                let src = g.row_slice(i).to_vec();
                for (gt, &c) in grads.iter_mut().zip(&w) {
                    gt.data_mut()[i * c..(i + 1) * c].copy_from_slice(&src[off..off + c]);
                    off += c;
                }
            }
            grads
        });
        Ok(self.push(out, parts.to_vec(), Some(vjp)))
    }

    /// Concatenate along rows; all parts must share a column count.
    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId, AutodiffError> {
        let c = self.value(parts[0]).cols();
        let heights: Vec<usize> = parts.iter().map(|&p| self.value(p).rows()).collect();
        if parts.iter().any(|&p| self.value(p).cols() != c) {
            return Err(AutodiffError::ShapeMismatch {
                op: "concat_rows",
                detail: "column counts differ".into(),
            });
        }
        let mut data = Vec::new();
        for &p in parts {
            data.extend_from_slice(self.value(p).data());
        }
        let total: usize = heights.iter().sum();
        let out = Tensor::matrix(total, c, data)?;
        let h = heights.clone();
        let vjp: Vjp = Box::new(move |g| {
            let mut grads = Vec::with_capacity(h.len());
            let mut off = 0;
            for &r in &h {
                let data = g.data()[off * c..(off + r) * c].to_vec();
                grads.push(Tensor::matrix(r, c, data).expect("concat_rows vjp"));
                off += r;
            }
            grads
        });
        Ok(self.push(out, parts.to_vec(), Some(vjp)))
    }

    /// Pick one column per row: out[i,0] = a[i, indices[i]].
    pub fn pick(&mut self, a: NodeId, indices: &[usize]) -> Result<NodeId, AutodiffError> {
        let va = self.value(a);
        let (r, c) = (va.rows(), va.cols());
        if indices.len() != r || indices.iter().any(|&j| j >= c) {
            return Err(AutodiffError::ShapeMismatch {
                op: "pick",
                detail: format!("{} indices for [{}, {}]", indices.len(), r, c),
            });
        }
        let data: Vec<f64> = indices.iter().enumerate().map(|(i, &j)| va.at(i, j)).collect();
        let out = Tensor::matrix(r, 1, data)?;
        let idx = indices.to_vec();
        let vjp: Vjp = Box::new(move |g| {
            let mut d = Tensor::zeros(&[r, c]);
            for (i, &j) in idx.iter().enumerate() {
                d.data_mut()[i * c + j] = g.data()[i];
            }
            vec![d]
        });
        Ok(self.push(out, vec![a], Some(vjp)))
    }

    /// Smooth L1 between a prediction node and a constant target, reduced by
    /// mean over elements.
    pub fn smooth_l1(
        &mut self,
        pred: NodeId,
        target: &Tensor,
        beta: f64,
    ) -> Result<NodeId, AutodiffError> {
        let vp = self.value(pred).clone();
        if vp.shape() != target.shape() {
            return Err(Self::shape_err("smooth_l1", &vp, target));
        }
        let n = vp.numel() as f64;
        let mut total = 0.0;
        for (&p, &t) in vp.data().iter().zip(target.data()) {
            let d = (p - t).abs();
            total += if d < beta { 0.5 * d * d / beta } else { d - 0.5 * beta };
        }
        let tgt = target.clone();
        let vjp: Vjp = Box::new(move |g| {
            let gv = g.scalar_value() / n;
            let d = Tensor::new(
                vp.shape().to_vec(),
                vp.data()
                    .iter()
                    .zip(tgt.data())
                    .map(|(&p, &t)| {
                        let diff = p - t;
                        gv * if diff.abs() < beta {
                            diff / beta
                        } else {
                            diff.signum()
                        }
                    })
                    .collect(),
            )
            .expect("smooth_l1 vjp");
            vec![d]
        });
        Ok(self.push(Tensor::scalar(total / n), vec![pred], Some(vjp)))
    }

    /// Reverse accumulation from a scalar loss. Returns one gradient slot per
    /// node; nodes unreachable from the loss hold `None`.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients, AutodiffError> {
        if !self.value(loss).is_scalar() {
            return Err(AutodiffError::NonScalarLoss {
                shape: self.value(loss).shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].clone() else { continue };
            let node = &self.nodes[i];
            if let Some(vjp) = &node.vjp {
                let parent_grads = vjp(&g);
                debug_assert_eq!(parent_grads.len(), node.parents.len());
                for (pid, pg) in node.parents.iter().zip(parent_grads) {
                    match &mut grads[pid.0] {
                        Some(acc) => acc.add_assign(&pg),
                        slot @ None => *slot = Some(pg),
                    }
                }
            }
        }
        Ok(Gradients { grads })
    }
}

pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for a node; zero tensor of the node's shape if unreachable.
    pub fn get(&self, tape: &Tape, id: NodeId) -> Tensor {
        self.grads[id.0]
            .clone()
            .unwrap_or_else(|| Tensor::zeros(tape.value(id).shape()))
    }

    pub fn get_opt(&self, id: NodeId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }
}
