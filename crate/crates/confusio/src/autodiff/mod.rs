//! Minimal reverse-mode automatic differentiation over dense f64 tensors.
//! The numeric substrate for every model in this crate: a tape of primitive
//! applications, exact vector-Jacobian products, an Adam-style optimizer,
//! and a bit-exact checkpoint container.

mod checkpoint;
mod optim;
mod tape;
mod tensor;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use optim::{grad_check, grad_check_params, AdamConfig, Binding, ParameterStore};
pub use tape::{Gradients, NodeId, Tape, LOG_EPS};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum AutodiffError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("non-finite value encountered in {op}")]
    NonFinite { op: &'static str },
    #[error("checkpoint I/O: {0}")]
    Io(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{} vs {} (tol {})", a, b, tol);
    }

    #[test]
    fn tanh_at_zero_is_zero() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::scalar(0.0));
        let y = t.tanh(x);
        assert_eq!(t.value(y).scalar_value(), 0.0);
    }

    #[test]
    fn softmax_is_shift_invariant_and_uniform_on_constants() {
        for c in [-3.0, 0.0, 100.0] {
            let mut t = Tape::new();
            let x = t.leaf(Tensor::row(&[c, c, c]));
            let y = t.softmax(x);
            for &v in t.value(y).data() {
                assert_close(v, 1.0 / 3.0, 1e-12);
            }
        }
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::matrix(2, 3, vec![1.0, -2.0, 0.5, 4.0, 4.0, -1.0]).unwrap());
        let y = t.softmax(x);
        for r in 0..2 {
            let s: f64 = t.value(y).row_slice(r).iter().sum();
            assert_close(s, 1.0, 1e-12);
        }
    }

    #[test]
    fn matmul_identity() {
        let a = Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let id = Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(a.matmul(&id).unwrap(), a);
    }

    #[test]
    fn matmul_shape_mismatch_is_an_error() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::matrix(2, 3, vec![0.0; 6]).unwrap());
        let b = t.leaf(Tensor::matrix(2, 3, vec![0.0; 6]).unwrap());
        assert!(matches!(
            t.matmul(a, b),
            Err(AutodiffError::ShapeMismatch { op: "matmul", .. })
        ));
    }

    #[test]
    fn backward_of_sum_is_ones() {
        let mut t = Tape::new();
        let p = t.leaf(Tensor::row(&[1.0, -2.0, 3.0]));
        let loss = t.sum(p);
        let grads = t.backward(loss).unwrap();
        assert_eq!(grads.get(&t, p).data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn backward_of_sum_tanh_at_zero_is_ones() {
        let mut t = Tape::new();
        let p = t.leaf(Tensor::row(&[0.0, 0.0]));
        let y = t.tanh(p);
        let loss = t.sum(y);
        let grads = t.backward(loss).unwrap();
        assert_eq!(grads.get(&t, p).data(), &[1.0, 1.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_loss() {
        let mut t = Tape::new();
        let p = t.leaf(Tensor::row(&[1.0, 2.0]));
        assert!(matches!(
            t.backward(p),
            Err(AutodiffError::NonScalarLoss { .. })
        ));
    }

    #[test]
    fn unreachable_parameter_gets_zero_gradient() {
        let mut t = Tape::new();
        let used = t.leaf(Tensor::scalar(2.0));
        let unused = t.leaf(Tensor::row(&[5.0, 5.0]));
        let loss = t.sum(used);
        let grads = t.backward(loss).unwrap();
        assert!(grads.get_opt(unused).is_none());
        assert_eq!(grads.get(&t, unused).data(), &[0.0, 0.0]);
    }

    #[test]
    fn grad_check_quadratic() {
        let point = Tensor::row(&[0.3, -1.2, 2.0]);
        let err = grad_check(
            |t, x| {
                let sq = t.mul(x, x)?;
                let s = t.sum(sq);
                Ok(t.scale(s, 0.5))
            },
            &point,
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-8, "err = {}", err);
    }

    #[test]
    fn grad_check_softmax_dot() {
        let point = Tensor::row(&[0.4, -0.9, 1.3, 0.1]);
        let err = grad_check(
            |t, x| {
                let sm = t.softmax(x);
                let prod = t.mul(sm, x)?;
                Ok(t.sum(prod))
            },
            &point,
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-6, "err = {}", err);
    }

    #[test]
    fn grad_check_dead_coordinate_is_zero() {
        let mut t = Tape::new();
        let x = t.leaf(Tensor::row(&[1.0, 2.0, 3.0]));
        let head = t.slice_cols(x, 0, 2).unwrap();
        let loss = t.sum(head);
        let grads = t.backward(loss).unwrap();
        assert_eq!(grads.get(&t, x).data(), &[1.0, 1.0, 0.0]);
    }

    #[test]
    fn primitive_vjps_pass_grad_check() {
        let point = Tensor::matrix(3, 4, vec![
            0.2, -0.7, 1.1, 0.4, -1.3, 0.6, 0.9, -0.2, 0.5, 1.7, -0.8, 0.3,
        ])
        .unwrap();
        let w = Tensor::matrix(4, 2, vec![0.3, -0.5, 0.8, 0.1, -0.4, 0.9, 0.2, 0.6]).unwrap();
        let gain = Tensor::row(&[1.1, 0.9, 1.0, 1.2]);
        let bias = Tensor::row(&[0.1, -0.2, 0.0, 0.3]);
        let err = grad_check(
            |t, x| {
                let g = t.constant(gain.clone());
                let b = t.constant(bias.clone());
                let ln = t.layer_norm(x, g, b)?;
                let wk = t.constant(w.clone());
                let h = t.matmul(ln, wk)?;
                let act = t.tanh(h);
                let sm = t.softmax(act);
                let lg = t.ln(sm);
                let pooled = t.mean_rows(lg);
                Ok(t.mean(pooled))
            },
            &point,
            1e-5,
        )
        .unwrap();
        assert!(err <= 1e-6, "err = {}", err);
    }

    #[test]
    fn adam_step_with_zero_gradients_keeps_parameters() {
        let mut store = ParameterStore::new();
        store.insert("w", Tensor::row(&[1.0, -2.0]));
        store.adam_step(0.1, AdamConfig::default());
        assert_eq!(store.get("w").data(), &[1.0, -2.0]);
        assert_eq!(store.step_count(), 1);
    }

    #[test]
    fn adam_first_step_magnitude_is_lr() {
        // With constant gradient g, the bias-corrected first step is
        // lr * g / (|g| + eps) ≈ lr * sign(g).
        let mut store = ParameterStore::new();
        store.insert("w", Tensor::scalar(0.0));
        let mut tape = Tape::new();
        let binding = store.bind(&mut tape);
        let w = binding.node("w");
        let loss = t_scale(&mut tape, w, 3.0);
        let grads = tape.backward(loss).unwrap();
        store.accumulate(&tape, &grads, &binding);
        store.adam_step(0.01, AdamConfig::default());
        let step = -store.get("w").scalar_value();
        assert_close(step, 0.01, 1e-6);
    }

    fn t_scale(tape: &mut Tape, x: NodeId, c: f64) -> NodeId {
        tape.scale(x, c)
    }

    #[test]
    fn adam_updates_are_deterministic() {
        let run = || {
            let mut store = ParameterStore::new();
            store.insert("w", Tensor::row(&[0.5, -0.5]));
            for _ in 0..3 {
                store.zero_grads();
                let mut tape = Tape::new();
                let binding = store.bind(&mut tape);
                let w = binding.node("w");
                let sq = tape.mul(w, w).unwrap();
                let loss = tape.sum(sq);
                let grads = tape.backward(loss).unwrap();
                store.accumulate(&tape, &grads, &binding);
                store.adam_step(0.05, AdamConfig::default());
            }
            store.get("w").data().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let dir = std::env::temp_dir().join("confusio_ckpt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rt.ckpt");
        let tensors = vec![
            ("a.w".to_string(), Tensor::matrix(2, 3, vec![
                1.5, -0.25, 1e-300, 3.7e100, 0.0, -0.0,
            ]).unwrap()),
            ("b".to_string(), Tensor::scalar(0.1 + 0.2)),
        ];
        write_checkpoint(&path, "{\"mode\":\"test\"}", &tensors).unwrap();
        let (meta, back) = read_checkpoint(&path).unwrap();
        assert_eq!(meta, "{\"mode\":\"test\"}");
        assert_eq!(back.len(), 2);
        for ((n1, t1), (n2, t2)) in tensors.iter().zip(&back) {
            assert_eq!(n1, n2);
            assert_eq!(t1.shape(), t2.shape());
            for (a, b) in t1.data().iter().zip(t2.data()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn embedding_lookup_and_scatter_gradient() {
        let mut t = Tape::new();
        let table = t.leaf(Tensor::matrix(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let rows = t.embed(table, &[2, 0, 2]).unwrap();
        assert_eq!(t.value(rows).data(), &[5.0, 6.0, 1.0, 2.0, 5.0, 6.0]);
        let loss = t.sum(rows);
        let grads = t.backward(loss).unwrap();
        // Row 2 was used twice, row 1 never.
        assert_eq!(grads.get(&t, table).data(), &[1.0, 1.0, 0.0, 0.0, 2.0, 2.0]);
    }
}
