//! Inversion networks: a convolutional encoder-decoder (UNet) mapping strain
//! images to material (and optionally stress) maps, and a dense
//! fully-connected baseline mapping coordinates to pointwise values.
//!
//! Both models own their parameters in a [`ParamStore`]; the computation
//! graph is rebuilt every training step by binding the store into a fresh
//! [`Graph`] and calling `forward`.

use crate::autodiff::{Graph, ParamId, ParamStore, Tensor, UpdateDirection, Var};
use crate::scalar::Scalar;
use crate::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BN_EPS: f64 = 1e-5;

/// UNet hyperparameters. `features` lists the channel width per resolution
/// level, shallow to deep.
#[derive(Debug, Clone, PartialEq)]
pub struct UNetConfig {
    pub in_channels: usize,
    pub out_channels: usize,
    pub features: Vec<usize>,
    pub seed: u64,
}

impl UNetConfig {
    /// The full-size network: five levels, 64..1024 channels.
    pub fn full(out_channels: usize, seed: u64) -> Self {
        UNetConfig { in_channels: 3, out_channels, features: vec![64, 128, 256, 512, 1024], seed }
    }

    /// A reduced schedule with the same depth, for constrained budgets.
    pub fn reduced(out_channels: usize, seed: u64) -> Self {
        UNetConfig { in_channels: 3, out_channels, features: vec![16, 32, 64, 128, 256], seed }
    }
}

/// Two bias-free 3x3 convolutions, each followed by batch normalization
/// (live statistics, batch size 1) and ReLU.
struct DoubleConv {
    conv1: ParamId,
    bn1: (ParamId, ParamId),
    conv2: ParamId,
    bn2: (ParamId, ParamId),
}

/// Convolutional encoder-decoder with skip connections.
///
/// Encoder: double conv, then per level 2x2 max pooling (floor semantics)
/// followed by a double conv. Decoder: bilinear x2 upsampling, a bias-free
/// 2x2 convolution, a bilinear resize onto the skip's spatial size, channel
/// concatenation with the skip, and a double conv. A final 1x1 convolution
/// with bias and no activation produces the output maps.
pub struct UNet<T: Scalar> {
    pub config: UNetConfig,
    pub store: ParamStore<T>,
    enc: Vec<DoubleConv>,
    up: Vec<ParamId>,
    dec: Vec<DoubleConv>,
    head: ParamId,
    head_bias: ParamId,
}

fn uniform_param<T: Scalar>(
    store: &mut ParamStore<T>,
    rng: &mut ChaCha8Rng,
    shape: Vec<usize>,
    bound: f64,
) -> ParamId {
    let n = shape.iter().product();
    let data: Vec<T> = (0..n)
        .map(|_| T::from_f64((2.0 * rng.gen::<f64>() - 1.0) * bound))
        .collect();
    store.add(shape, data, UpdateDirection::Descent)
}

/// He-uniform bound for a conv kernel feeding a ReLU: `sqrt(6 / fan_in)`.
fn conv_param<T: Scalar>(
    store: &mut ParamStore<T>,
    rng: &mut ChaCha8Rng,
    co: usize,
    ci: usize,
    k: usize,
) -> ParamId {
    let bound = (6.0 / (ci * k * k) as f64).sqrt();
    uniform_param(store, rng, vec![co, ci, k, k], bound)
}

fn bn_params<T: Scalar>(store: &mut ParamStore<T>, c: usize) -> (ParamId, ParamId) {
    let gamma = store.add(vec![c], vec![T::one(); c], UpdateDirection::Descent);
    let beta = store.add(vec![c], vec![T::zero(); c], UpdateDirection::Descent);
    (gamma, beta)
}

fn double_conv_params<T: Scalar>(
    store: &mut ParamStore<T>,
    rng: &mut ChaCha8Rng,
    cin: usize,
    cout: usize,
) -> DoubleConv {
    DoubleConv {
        conv1: conv_param(store, rng, cout, cin, 3),
        bn1: bn_params(store, cout),
        conv2: conv_param(store, rng, cout, cout, 3),
        bn2: bn_params(store, cout),
    }
}

impl<T: Scalar> UNet<T> {
    pub fn new(config: UNetConfig) -> Result<Self> {
        if config.features.len() < 2 {
            return Err(crate::Error::invalid("UNet needs at least two levels"));
        }
        if config.in_channels == 0 || config.out_channels == 0 {
            return Err(crate::Error::invalid("UNet channel counts must be positive"));
        }
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let f = &config.features;
        let levels = f.len();

        let mut enc = Vec::with_capacity(levels);
        enc.push(double_conv_params(&mut store, &mut rng, config.in_channels, f[0]));
        for lvl in 1..levels {
            enc.push(double_conv_params(&mut store, &mut rng, f[lvl - 1], f[lvl]));
        }
        let mut up = Vec::with_capacity(levels - 1);
        let mut dec = Vec::with_capacity(levels - 1);
        for lvl in (0..levels - 1).rev() {
            up.push(conv_param(&mut store, &mut rng, f[lvl], f[lvl + 1], 2));
            dec.push(double_conv_params(&mut store, &mut rng, 2 * f[lvl], f[lvl]));
        }
        // Small head init: outputs start near zero so the first epochs are
        // not spent taming large random equilibrium residuals.
        let head = uniform_param(
            &mut store,
            &mut rng,
            vec![config.out_channels, f[0], 1, 1],
            0.01 * (6.0 / f[0] as f64).sqrt(),
        );
        let head_bias =
            store.add(vec![config.out_channels], vec![T::zero(); config.out_channels], UpdateDirection::Descent);

        Ok(UNet { config, store, enc, up, dec, head, head_bias })
    }

    pub fn param_count(&self) -> usize {
        self.store.total_len()
    }

    fn double_conv(
        &self,
        g: &mut Graph<T>,
        bind: &[Var],
        dc: &DoubleConv,
        x: Var,
    ) -> Result<Var> {
        let eps = T::from_f64(BN_EPS);
        let x = g.conv2d(x, bind[dc.conv1.0], 1, 1)?;
        let x = g.batchnorm2d(x, bind[dc.bn1.0 .0], bind[dc.bn1.1 .0], eps);
        let x = g.relu(x);
        let x = g.conv2d(x, bind[dc.conv2.0], 1, 1)?;
        let x = g.batchnorm2d(x, bind[dc.bn2.0 .0], bind[dc.bn2.1 .0], eps);
        Ok(g.relu(x))
    }

    /// Runs the network on `input: [C_in, H, W]`, returning `[C_out, H, W]`.
    /// `bind` must come from `self.store.bind(g)`.
    pub fn forward(&self, g: &mut Graph<T>, bind: &[Var], input: Var) -> Result<Var> {
        let levels = self.config.features.len();
        let need = 1usize << (levels - 1);
        let (h0, w0) = (g.shape(input)[1], g.shape(input)[2]);
        if h0 < need || w0 < need {
            return Err(crate::Error::invalid(format!(
                "input {h0}x{w0} too small for {levels} levels (needs at least {need}x{need})"
            )));
        }
        let mut skips = Vec::with_capacity(levels - 1);
        let mut x = self.double_conv(g, bind, &self.enc[0], input)?;
        for lvl in 1..levels {
            skips.push(x);
            x = g.maxpool2(x);
            x = self.double_conv(g, bind, &self.enc[lvl], x)?;
        }
        for (step, lvl) in (0..levels - 1).rev().enumerate() {
            let skip = skips[lvl];
            let (h, w) = (g.shape(x)[1], g.shape(x)[2]);
            x = g.upsample_bilinear(x, 2 * h, 2 * w);
            x = g.conv2d(x, bind[self.up[step].0], 1, 0)?;
            let (sh, sw) = (g.shape(skip)[1], g.shape(skip)[2]);
            if g.shape(x)[1] != sh || g.shape(x)[2] != sw {
                x = g.upsample_bilinear(x, sh, sw);
            }
            x = g.concat_channels(skip, x);
            x = self.double_conv(g, bind, &self.dec[step], x)?;
        }
        let out = g.conv2d(x, bind[self.head.0], 1, 0)?;
        Ok(g.add_channel_bias(out, bind[self.head_bias.0]))
    }
}

/// Fully connected network: `dims = [in, hidden.., out]`, tanh on hidden
/// layers, linear output. Weights are Xavier-uniform, biases zero.
pub struct Mlp {
    pub dims: Vec<usize>,
    weights: Vec<ParamId>,
    biases: Vec<ParamId>,
}

impl Mlp {
    pub fn build<T: Scalar>(
        store: &mut ParamStore<T>,
        rng: &mut ChaCha8Rng,
        dims: Vec<usize>,
    ) -> Self {
        assert!(dims.len() >= 2, "MLP needs at least one layer");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in dims.windows(2) {
            let (i, o) = (pair[0], pair[1]);
            let bound = (6.0 / (i + o) as f64).sqrt();
            weights.push(uniform_param(store, rng, vec![o, i], bound));
            biases.push(store.add(vec![o], vec![T::zero(); o], UpdateDirection::Descent));
        }
        Mlp { dims, weights, biases }
    }

    /// Evaluates the network on `x: [N, in]`.
    pub fn forward<T: Scalar>(&self, g: &mut Graph<T>, bind: &[Var], x: Var) -> Var {
        let last = self.weights.len() - 1;
        let mut a = x;
        for l in 0..=last {
            a = g.linear(a, bind[self.weights[l].0], Some(bind[self.biases[l].0]));
            if l != last {
                a = g.tanh(a);
            }
        }
        a
    }

    /// Evaluates the network together with forward-mode directional
    /// derivatives along constant input directions `dirs` (each `[N, in]`).
    /// Returns the output and one tangent `[N, out]` per direction; all of
    /// them are graph nodes, so reverse mode differentiates through the
    /// tangents as well.
    pub fn forward_with_tangents<T: Scalar>(
        &self,
        g: &mut Graph<T>,
        bind: &[Var],
        x: Var,
        dirs: &[Tensor<T>],
    ) -> (Var, Vec<Var>) {
        let last = self.weights.len() - 1;
        let mut a = x;
        let mut tangents: Vec<Var> =
            dirs.iter().map(|d| g.constant(d.shape.clone(), d.data.clone())).collect();
        for l in 0..=last {
            let w = bind[self.weights[l].0];
            let z = g.linear(a, w, Some(bind[self.biases[l].0]));
            for t in &mut tangents {
                *t = g.linear(*t, w, None);
            }
            if l != last {
                a = g.tanh(z);
                // d tanh(z) = (1 - a^2) dz
                let a2 = g.mul(a, a);
                let neg = g.scale(a2, -T::one());
                let deriv = g.add_scalar(neg, T::one());
                for t in &mut tangents {
                    *t = g.mul(deriv, *t);
                }
            } else {
                a = z;
            }
        }
        (a, tangents)
    }
}

/// The dense baseline: one MLP from coordinates to the two material maps and
/// one to the three stress components, sharing a parameter store.
pub struct Pinn<T: Scalar> {
    pub store: ParamStore<T>,
    pub material_net: Mlp,
    pub stress_net: Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PinnConfig {
    /// Hidden widths for both networks; default `[64; 4]`.
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl PinnConfig {
    pub fn new(seed: u64) -> Self {
        PinnConfig { hidden: vec![64; 4], seed }
    }
}

impl<T: Scalar> Pinn<T> {
    pub fn new(config: &PinnConfig) -> Self {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut dims_m = vec![2];
        dims_m.extend_from_slice(&config.hidden);
        dims_m.push(2);
        let mut dims_s = vec![2];
        dims_s.extend_from_slice(&config.hidden);
        dims_s.push(3);
        let material_net = Mlp::build(&mut store, &mut rng, dims_m);
        let stress_net = Mlp::build(&mut store, &mut rng, dims_s);
        Pinn { store, material_net, stress_net }
    }
}
