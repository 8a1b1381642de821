//! GRU stack forward pass and backpropagation through time.
//!
//! Gate order is reset, update, candidate:
//!   r = sigmoid(W_ir x + b_ir + W_hr h' + b_hr)
//!   z = sigmoid(W_iz x + b_iz + W_hz h' + b_hz)
//!   n = tanh(W_in x + b_in + r * (W_hn h' + b_hn))
//!   h = (1 - z) * n + z * h'
//! where h' is the previous hidden state, zero at the first frame. Every
//! observation is processed from a zero initial state; transitions are
//! replayed out of order, so no hidden state is carried across steps.
//!
//! Dropout is inverted and sampled per timestep in train mode: layer `l`'s
//! output sequence is masked before feeding layer `l+1`, and the last rate
//! masks the final hidden state before the linear head. Eval mode draws
//! nothing from the RNG.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, Array3, ArrayView2, ArrayView3, ArrayViewMut2, Axis, NdFloat, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::params::{view1, view2, NetLayout};
use super::LearnerError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug)]
pub struct LayerCache<F> {
    /// (B, T, Fin) input actually fed, after any upstream dropout.
    input: Array3<F>,
    r: Array3<F>,
    z: Array3<F>,
    n: Array3<F>,
    /// W_hn h' + b_hn, needed for the reset-gate gradient.
    hn: Array3<F>,
    /// (B, T, H) outputs before dropout.
    h: Array3<F>,
    /// Mask applied to `h` when feeding the next layer.
    mask: Option<Array3<F>>,
}

#[derive(Debug)]
pub struct ForwardCache<F> {
    layers: Vec<LayerCache<F>>,
    /// (B, Hin) head input after dropout.
    head_in: Array2<F>,
    head_mask: Option<Array2<F>>,
    /// (B, A) Q-values.
    pub q: Array2<F>,
}

fn sigmoid<F: NdFloat>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// Inverted dropout mask with entries 0 or 1/(1-p), sampled row-major.
fn sample_mask<F: NdFloat>(len: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<F> {
    let keep = F::from(1.0 / (1.0 - p)).unwrap();
    (0..len).map(|_| if rng.gen::<f64>() < p { F::zero() } else { keep }).collect()
}

/// Runs the stack on a (B, T, F) batch; in train mode dropout is sampled
/// from `rng`. Returns everything the backward pass needs plus the Q-values.
pub fn forward<F: NdFloat>(
    layout: &NetLayout,
    params: &Array1<F>,
    obs: ArrayView3<'_, F>,
    mode: Mode,
    rng: &mut ChaCha8Rng,
) -> Result<ForwardCache<F>, LearnerError> {
    let (b, t, f) = obs.dim();
    if f != layout.feature_dim || b == 0 || t == 0 {
        return Err(LearnerError::ShapeMismatch {
            expected: format!("(B>0, T>0, {})", layout.feature_dim),
            got: format!("({b}, {t}, {f})"),
        });
    }

    let mut layers = Vec::with_capacity(layout.n_layers());
    let mut input = obs.to_owned();
    for l in 0..layout.n_layers() {
        let (h_size, fin) = (layout.hidden[l], layout.layer_input(l));
        let ranges = layout.gru(l);
        let w_ih = view2(params, ranges.w_ih, (3 * h_size, fin));
        let w_hh = view2(params, ranges.w_hh, (3 * h_size, h_size));
        let b_ih = view1(params, ranges.b_ih);
        let b_hh = view1(params, ranges.b_hh);

        let mut r_seq = Array3::zeros((b, t, h_size));
        let mut z_seq = Array3::zeros((b, t, h_size));
        let mut n_seq = Array3::zeros((b, t, h_size));
        let mut hn_seq = Array3::zeros((b, t, h_size));
        let mut h_seq = Array3::zeros((b, t, h_size));
        let mut h_prev = Array2::<F>::zeros((b, h_size));
        for ti in 0..t {
            let x_t = input.index_axis(Axis(1), ti);
            let mut gi = x_t.dot(&w_ih.t());
            gi += &b_ih;
            let mut gh = h_prev.dot(&w_hh.t());
            gh += &b_hh;

            let mut r_t = Array2::zeros((b, h_size));
            Zip::from(&mut r_t)
                .and(&gi.slice(s![.., 0..h_size]))
                .and(&gh.slice(s![.., 0..h_size]))
                .for_each(|r, &a, &c| *r = sigmoid(a + c));
            let mut z_t = Array2::zeros((b, h_size));
            Zip::from(&mut z_t)
                .and(&gi.slice(s![.., h_size..2 * h_size]))
                .and(&gh.slice(s![.., h_size..2 * h_size]))
                .for_each(|z, &a, &c| *z = sigmoid(a + c));
            let hn_t = gh.slice(s![.., 2 * h_size..3 * h_size]).to_owned();
            let mut n_t = Array2::zeros((b, h_size));
            Zip::from(&mut n_t)
                .and(&gi.slice(s![.., 2 * h_size..3 * h_size]))
                .and(&r_t)
                .and(&hn_t)
                .for_each(|n, &a, &r, &hn| *n = (a + r * hn).tanh());
            let mut h_t = Array2::zeros((b, h_size));
            Zip::from(&mut h_t)
                .and(&z_t)
                .and(&n_t)
                .and(&h_prev)
                .for_each(|h, &z, &n, &hp| *h = (F::one() - z) * n + z * hp);

            r_seq.index_axis_mut(Axis(1), ti).assign(&r_t);
            z_seq.index_axis_mut(Axis(1), ti).assign(&z_t);
            n_seq.index_axis_mut(Axis(1), ti).assign(&n_t);
            hn_seq.index_axis_mut(Axis(1), ti).assign(&hn_t);
            h_seq.index_axis_mut(Axis(1), ti).assign(&h_t);
            h_prev = h_t;
        }

        // Mask this layer's outputs for the next layer; the last layer is
        // masked only at the head below.
        let mask = if l + 1 < layout.n_layers() && mode == Mode::Train && layout.dropout[l] > 0.0 {
            let m = Array3::from_shape_vec(
                (b, t, h_size),
                sample_mask(b * t * h_size, layout.dropout[l], rng),
            )
            .expect("mask shape");
            Some(m)
        } else {
            None
        };
        let next_input = match &mask {
            Some(m) => &h_seq * m,
            None => h_seq.clone(),
        };
        layers.push(LayerCache {
            input,
            r: r_seq,
            z: z_seq,
            n: n_seq,
            hn: hn_seq,
            h: h_seq,
            mask,
        });
        input = next_input;
    }

    let last = input.index_axis(Axis(1), t - 1).to_owned();
    let head_rate = layout.dropout.last().copied().unwrap_or(0.0);
    let head_mask = if mode == Mode::Train && head_rate > 0.0 && layout.n_layers() > 0 {
        let m = Array2::from_shape_vec(
            (b, layout.head_input()),
            sample_mask(b * layout.head_input(), head_rate, rng),
        )
        .expect("mask shape");
        Some(m)
    } else {
        None
    };
    let head_in = match &head_mask {
        Some(m) => &last * m,
        None => last,
    };

    let w = view2(params, layout.head_w(), (layout.n_actions, layout.head_input()));
    let bias = view1(params, layout.head_b());
    let mut q = head_in.dot(&w.t());
    q += &bias;
    Ok(ForwardCache { layers, head_in, head_mask, q })
}

/// Convenience eval-mode forward for a single (T, F) observation.
pub fn q_eval<F: NdFloat>(
    layout: &NetLayout,
    params: &Array1<F>,
    obs: &Array2<F>,
) -> Result<Array1<F>, LearnerError> {
    let (t, f) = obs.dim();
    let obs3 = obs.view().into_shape_with_order((1, t, f)).map_err(|_| {
        LearnerError::ShapeMismatch { expected: "(T, F)".into(), got: format!("({t}, {f})") }
    })?;
    // Eval mode draws nothing; the RNG is a dummy.
    let mut rng = rand::SeedableRng::seed_from_u64(0);
    let cache = forward(layout, params, obs3, Mode::Eval, &mut rng)?;
    Ok(cache.q.index_axis(Axis(0), 0).to_owned())
}

/// Accumulates `block += a^T . b` into the flat gradient range `r`.
fn add_outer<F: NdFloat>(
    grads: &mut Array1<F>,
    r: std::ops::Range<usize>,
    shape: (usize, usize),
    a: &Array2<F>,
    b: ArrayView2<'_, F>,
) {
    let slice = grads.as_slice_mut().expect("contiguous grads");
    let mut block = ArrayViewMut2::from_shape(shape, &mut slice[r]).expect("range matches shape");
    general_mat_mul(F::one(), &a.t(), &b, F::one(), &mut block);
}

fn add_vec<F: NdFloat>(grads: &mut Array1<F>, r: std::ops::Range<usize>, v: &Array1<F>) {
    let slice = grads.as_slice_mut().expect("contiguous grads");
    for (dst, &src) in slice[r].iter_mut().zip(v.iter()) {
        *dst += src;
    }
}

/// Backpropagation through time. `dq` is the loss gradient at the Q-values,
/// shape (B, A); returns the gradient for every parameter, flat.
pub fn backward<F: NdFloat>(
    layout: &NetLayout,
    params: &Array1<F>,
    cache: &ForwardCache<F>,
    dq: &Array2<F>,
) -> Array1<F> {
    let mut grads = Array1::zeros(layout.n_params());
    let (b, a) = dq.dim();
    debug_assert_eq!(a, layout.n_actions);
    debug_assert_eq!(b, cache.head_in.nrows());

    // Head: q = head_in . W^T + b.
    add_outer(&mut grads, layout.head_w(), (a, layout.head_input()), dq, cache.head_in.view());
    add_vec(&mut grads, layout.head_b(), &dq.sum_axis(Axis(0)));
    let w = view2(params, layout.head_w(), (a, layout.head_input()));
    let mut d_head_in = dq.dot(&w);
    if let Some(m) = &cache.head_mask {
        d_head_in *= m;
    }
    if layout.n_layers() == 0 {
        return grads;
    }

    // Seed the top layer's output gradient at the final timestep only.
    let top = layout.n_layers() - 1;
    let t = cache.layers[top].h.dim().1;
    let mut dh_out = Array3::zeros(cache.layers[top].h.dim());
    dh_out.index_axis_mut(Axis(1), t - 1).assign(&d_head_in);

    for l in (0..layout.n_layers()).rev() {
        let d_input = bptt_layer(layout, params, l, &cache.layers[l], &dh_out, &mut grads);
        if l > 0 {
            dh_out = match &cache.layers[l - 1].mask {
                Some(m) => &d_input * m,
                None => d_input,
            };
        }
    }
    grads
}

fn bptt_layer<F: NdFloat>(
    layout: &NetLayout,
    params: &Array1<F>,
    l: usize,
    cache: &LayerCache<F>,
    dh_out: &Array3<F>,
    grads: &mut Array1<F>,
) -> Array3<F> {
    let (b, t, h) = cache.h.dim();
    let fin = layout.layer_input(l);
    let ranges = layout.gru(l);
    let w_ih = view2(params, ranges.w_ih.clone(), (3 * h, fin));
    let w_hh = view2(params, ranges.w_hh.clone(), (3 * h, h));

    let mut d_w_ih = Array2::<F>::zeros((3 * h, fin));
    let mut d_w_hh = Array2::<F>::zeros((3 * h, h));
    let mut d_b_ih = Array1::<F>::zeros(3 * h);
    let mut d_b_hh = Array1::<F>::zeros(3 * h);
    let mut d_input = Array3::<F>::zeros((b, t, fin));
    let mut dh_carry = Array2::<F>::zeros((b, h));
    let zero_prev = Array2::<F>::zeros((b, h));
    let one = F::one();

    for ti in (0..t).rev() {
        let dh = &dh_out.index_axis(Axis(1), ti) + &dh_carry;
        let r_t = cache.r.index_axis(Axis(1), ti);
        let z_t = cache.z.index_axis(Axis(1), ti);
        let n_t = cache.n.index_axis(Axis(1), ti);
        let hn_t = cache.hn.index_axis(Axis(1), ti);
        let h_prev: ArrayView2<'_, F> =
            if ti == 0 { zero_prev.view() } else { cache.h.index_axis(Axis(1), ti - 1) };

        // h = (1-z) n + z h'  =>  dz = dh (h' - n) z (1-z),  dn = dh (1-z) (1-n^2)
        let mut dz = Array2::zeros((b, h));
        Zip::from(&mut dz).and(&dh).and(&h_prev).and(&n_t).and(&z_t).for_each(
            |dz, &dh, &hp, &n, &z| *dz = dh * (hp - n) * z * (one - z),
        );
        let mut dn = Array2::zeros((b, h));
        Zip::from(&mut dn)
            .and(&dh)
            .and(&z_t)
            .and(&n_t)
            .for_each(|dn, &dh, &z, &n| *dn = dh * (one - z) * (one - n * n));
        // n = tanh(g_in + r hn)  =>  dr = dn hn r (1-r)
        let mut dr = Array2::zeros((b, h));
        Zip::from(&mut dr)
            .and(&dn)
            .and(&hn_t)
            .and(&r_t)
            .for_each(|dr, &dn, &hn, &r| *dr = dn * hn * r * (one - r));

        let mut dgi = Array2::zeros((b, 3 * h));
        dgi.slice_mut(s![.., 0..h]).assign(&dr);
        dgi.slice_mut(s![.., h..2 * h]).assign(&dz);
        dgi.slice_mut(s![.., 2 * h..3 * h]).assign(&dn);
        let mut dgh = dgi.clone();
        // The candidate's recurrent pre-activation is gated by r.
        Zip::from(&mut dgh.slice_mut(s![.., 2 * h..3 * h]))
            .and(&r_t)
            .for_each(|g, &r| *g *= r);

        let x_t = cache.input.index_axis(Axis(1), ti);
        general_mat_mul(one, &dgi.t(), &x_t, one, &mut d_w_ih);
        d_b_ih += &dgi.sum_axis(Axis(0));
        general_mat_mul(one, &dgh.t(), &h_prev, one, &mut d_w_hh);
        d_b_hh += &dgh.sum_axis(Axis(0));

        let mut dx_t = d_input.index_axis_mut(Axis(1), ti);
        general_mat_mul(one, &dgi, &w_ih, F::zero(), &mut dx_t);

        dh_carry = dgh.dot(&w_hh);
        Zip::from(&mut dh_carry).and(&dh).and(&z_t).for_each(|c, &dh, &z| *c += dh * z);
    }

    add_outer_owned(grads, ranges.w_ih, &d_w_ih);
    add_outer_owned(grads, ranges.w_hh, &d_w_hh);
    add_vec(grads, ranges.b_ih, &d_b_ih);
    add_vec(grads, ranges.b_hh, &d_b_hh);
    d_input
}

fn add_outer_owned<F: NdFloat>(grads: &mut Array1<F>, r: std::ops::Range<usize>, m: &Array2<F>) {
    let slice = grads.as_slice_mut().expect("contiguous grads");
    for (dst, &src) in slice[r].iter_mut().zip(m.iter()) {
        *dst += src;
    }
}
