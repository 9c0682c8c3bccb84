//! LSTM cell and masked (stacked) bidirectional sequence encoder.
//!
//! Gate rows are laid out `[input, forget, cell, output]`, each `hidden_dim`
//! long, in the `(4·hidden, in)` / `(4·hidden, hidden)` weight matrices.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{ParamStore, Tape, Tensor, Var};

/// Tape-bound handles for one LSTM cell's weights.
#[derive(Clone, Copy, Debug)]
pub struct LstmCellParams {
    pub w_ih: Var,
    pub w_hh: Var,
    pub bias: Var,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl LstmCellParams {
    /// Parameter names for a cell stored under `prefix`.
    pub fn names(prefix: &str) -> [String; 3] {
        [
            format!("{prefix}.W_ih"),
            format!("{prefix}.W_hh"),
            format!("{prefix}.b"),
        ]
    }

    /// Adds freshly initialised weights under `prefix`: uniform in
    /// `±1/√hidden`, zero bias except the forget gate, which starts at 1.
    pub fn init<T: Scalar, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) {
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        let [ih, hh, b] = Self::names(prefix);
        store.insert(ih, uniform(&[4 * hidden_dim, input_dim], bound, rng));
        store.insert(hh, uniform(&[4 * hidden_dim, hidden_dim], bound, rng));
        let mut bias = Tensor::zeros(&[4 * hidden_dim]);
        bias.data_mut()[hidden_dim..2 * hidden_dim]
            .iter_mut()
            .for_each(|v| *v = T::one());
        store.insert(b, bias);
    }

    /// Looks up the cell under `prefix` on `tape` and validates its shapes.
    pub fn bind<T: Scalar>(tape: &mut Tape<'_, T>, prefix: &str) -> Result<Self> {
        let [ih, hh, b] = Self::names(prefix);
        let w_ih = tape.param(&ih)?;
        let w_hh = tape.param(&hh)?;
        let bias = tape.param(&b)?;
        let s_ih = tape.shape(w_ih).to_vec();
        let s_hh = tape.shape(w_hh).to_vec();
        let s_b = tape.shape(bias).to_vec();
        if s_ih.len() != 2 || s_ih[0] % 4 != 0 {
            return Err(Error::InvalidTensor(format!("{ih} has shape {s_ih:?}")));
        }
        let hidden_dim = s_ih[0] / 4;
        if s_hh != [4 * hidden_dim, hidden_dim] {
            return Err(Error::ShapeMismatch {
                op: "lstm W_hh",
                left: s_hh,
                right: vec![4 * hidden_dim, hidden_dim],
            });
        }
        if s_b != [4 * hidden_dim] {
            return Err(Error::ShapeMismatch {
                op: "lstm bias",
                left: s_b,
                right: vec![4 * hidden_dim],
            });
        }
        Ok(Self {
            w_ih,
            w_hh,
            bias,
            input_dim: s_ih[1],
            hidden_dim,
        })
    }
}

pub(crate) fn uniform<T: Scalar, R: Rng + ?Sized>(shape: &[usize], bound: f64, rng: &mut R) -> Tensor<T> {
    let n = shape.iter().product();
    let data = (0..n).map(|_| T::of(rng.gen_range(-bound..bound))).collect();
    Tensor::new(shape.to_vec(), data).expect("shape and data agree")
}

/// One LSTM step. Returns `(h, c)`.
pub fn lstm_cell<T: Scalar>(
    tape: &mut Tape<'_, T>,
    x: Var,
    h_prev: Var,
    c_prev: Var,
    p: &LstmCellParams,
) -> Result<(Var, Var)> {
    let d = p.hidden_dim;
    for (what, v, want) in [("x", x, p.input_dim), ("h_prev", h_prev, d), ("c_prev", c_prev, d)] {
        if tape.shape(v) != [want] {
            return Err(Error::ShapeMismatch {
                op: if what == "x" { "lstm_cell input" } else { "lstm_cell state" },
                left: tape.shape(v).to_vec(),
                right: vec![want],
            });
        }
    }
    let wx = tape.matmul(p.w_ih, x)?;
    let wh = tape.matmul(p.w_hh, h_prev)?;
    let pre = tape.add(wx, wh)?;
    let pre = tape.add(pre, p.bias)?;
    let i = tape.slice(pre, 0, d)?;
    let f = tape.slice(pre, d, d)?;
    let g = tape.slice(pre, 2 * d, d)?;
    let o = tape.slice(pre, 3 * d, d)?;
    let i = tape.sigmoid(i);
    let f = tape.sigmoid(f);
    let g = tape.tanh(g);
    let o = tape.sigmoid(o);
    let keep = tape.mul(f, c_prev)?;
    let write = tape.mul(i, g)?;
    let c = tape.add(keep, write)?;
    let tc = tape.tanh(c);
    let h = tape.mul(o, tc)?;
    Ok((h, c))
}

/// Runs one direction over `inputs`, skipping masked steps so state carries
/// through them unchanged. Returns per-step outputs (`None` where masked)
/// and the final hidden state.
fn run_direction<T: Scalar>(
    tape: &mut Tape<'_, T>,
    inputs: &[Option<Var>],
    cell: &LstmCellParams,
    reverse: bool,
) -> Result<(Vec<Option<Var>>, Var)> {
    let mut h = tape.zeros(cell.hidden_dim);
    let mut c = tape.zeros(cell.hidden_dim);
    let mut outs = vec![None; inputs.len()];
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..inputs.len()).rev())
    } else {
        Box::new(0..inputs.len())
    };
    for t in order {
        if let Some(x) = inputs[t] {
            let (nh, nc) = lstm_cell(tape, x, h, c, cell)?;
            h = nh;
            c = nc;
            outs[t] = Some(h);
        }
    }
    Ok((outs, h))
}

/// Stacked bidirectional encoder. Returns `[h_fwd_last ; h_bwd_first]` of the
/// top layer, taken at the last and first unmasked positions.
pub fn bilstm_sequence<T: Scalar>(
    tape: &mut Tape<'_, T>,
    seq: &[Var],
    layers: &[(LstmCellParams, LstmCellParams)],
    mask: &[bool],
) -> Result<Var> {
    if mask.len() != seq.len() {
        return Err(Error::ShapeMismatch {
            op: "bilstm mask",
            left: vec![seq.len()],
            right: vec![mask.len()],
        });
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptySequence("bilstm input has no unmasked step"));
    }
    if layers.is_empty() {
        return Err(Error::Config("bilstm needs at least one layer".into()));
    }
    let mut inputs: Vec<Option<Var>> = seq
        .iter()
        .zip(mask)
        .map(|(&v, &m)| m.then_some(v))
        .collect();
    let mut result = None;
    for (li, (fwd, bwd)) in layers.iter().enumerate() {
        let (outs_f, last_f) = run_direction(tape, &inputs, fwd, false)?;
        let (outs_b, last_b) = run_direction(tape, &inputs, bwd, true)?;
        if li + 1 == layers.len() {
            result = Some(tape.concat(&[last_f, last_b])?);
        } else {
            inputs = outs_f
                .into_iter()
                .zip(outs_b)
                .map(|(f, b)| match (f, b) {
                    (Some(f), Some(b)) => tape.concat(&[f, b]).map(Some),
                    _ => Ok(None),
                })
                .collect::<Result<_>>()?;
        }
    }
    Ok(result.expect("at least one layer"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_cell(store: &mut ParamStore<f64>, prefix: &str, din: usize, dh: usize) {
        let [ih, hh, b] = LstmCellParams::names(prefix);
        store.insert(ih, Tensor::zeros(&[4 * dh, din]));
        store.insert(hh, Tensor::zeros(&[4 * dh, dh]));
        store.insert(b, Tensor::zeros(&[4 * dh]));
    }

    #[test]
    fn zero_weights_zero_state_is_fixed_point() {
        let mut store = ParamStore::new();
        zero_cell(&mut store, "c", 3, 2);
        let mut tape = Tape::new(&store);
        let cell = LstmCellParams::bind(&mut tape, "c").unwrap();
        let x = tape.constant(Tensor::vector(vec![0.7, -2.0, 5.0]));
        let h0 = tape.zeros(2);
        let c0 = tape.zeros(2);
        let (h, c) = lstm_cell(&mut tape, x, h0, c0, &cell).unwrap();
        assert_eq!(tape.value(h), &[0.0, 0.0]);
        assert_eq!(tape.value(c), &[0.0, 0.0]);
    }

    #[test]
    fn zero_weights_unit_cell_halves() {
        let mut store = ParamStore::new();
        zero_cell(&mut store, "c", 3, 2);
        let mut tape = Tape::new(&store);
        let cell = LstmCellParams::bind(&mut tape, "c").unwrap();
        let x = tape.constant(Tensor::vector(vec![1.0, 1.0, 1.0]));
        let h0 = tape.zeros(2);
        let c0 = tape.constant(Tensor::vector(vec![1.0, 1.0]));
        let (h, c) = lstm_cell(&mut tape, x, h0, c0, &cell).unwrap();
        // gates all sigmoid(0) = 0.5, g = tanh(0) = 0
        assert_eq!(tape.value(c), &[0.5, 0.5]);
        let want = 0.5 * 0.5f64.tanh();
        for &v in tape.value(h) {
            assert!((v - want).abs() < 1e-15);
            assert!((v - 0.2311).abs() < 1e-4);
        }
    }

    #[test]
    fn cell_rejects_bad_dims() {
        let mut store = ParamStore::new();
        zero_cell(&mut store, "c", 3, 2);
        let mut tape = Tape::new(&store);
        let cell = LstmCellParams::bind(&mut tape, "c").unwrap();
        let x = tape.zeros(4);
        let h0 = tape.zeros(2);
        let c0 = tape.zeros(2);
        assert!(matches!(
            lstm_cell(&mut tape, x, h0, c0, &cell),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn init_sets_forget_bias() {
        let mut store = ParamStore::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        LstmCellParams::init(&mut store, "c", 3, 4, &mut rng);
        let b = store.get("c.b").unwrap();
        assert_eq!(&b.data()[0..4], &[0.0; 4]);
        assert_eq!(&b.data()[4..8], &[1.0; 4]);
        assert_eq!(&b.data()[8..16], &[0.0; 8]);
        let bound = 0.5;
        assert!(store.get("c.W_ih").unwrap().data().iter().all(|v| v.abs() < bound));
        assert_eq!(store.get("c.W_hh").unwrap().shape(), &[16, 4]);
    }

    #[test]
    fn all_masked_is_an_error() {
        let mut store = ParamStore::new();
        zero_cell(&mut store, "f", 2, 2);
        zero_cell(&mut store, "b", 2, 2);
        let mut tape = Tape::new(&store);
        let f = LstmCellParams::bind(&mut tape, "f").unwrap();
        let b = LstmCellParams::bind(&mut tape, "b").unwrap();
        let x = tape.zeros(2);
        assert!(matches!(
            bilstm_sequence(&mut tape, &[x, x], &[(f, b)], &[false, false]),
            Err(Error::EmptySequence(_))
        ));
        assert!(bilstm_sequence(&mut tape, &[], &[(f, b)], &[]).is_err());
    }
}
