//! Shared-trunk multilayer perceptron with two heads: class logits and an
//! L2-normalized embedding. One parameter set serves every branch of a
//! tuplet, so all forward passes share the same weights and gradients from
//! all branches accumulate into one buffer.
//!
//! The forward pass caches everything the analytic backward pass needs;
//! there is no autodiff graph. The backward pass includes the
//! normalization Jacobian `(I - y y^T) / ||z||`, which kills the radial
//! component of the upstream embedding gradient.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, Matrix};

/// Architecture of the network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetConfig {
    /// Input feature dimension.
    pub input_dim: usize,
    /// Widths of the rectified trunk layers; may be empty for a linear
    /// trunk (heads read the input directly).
    pub hidden_dims: Vec<usize>,
    /// Embedding dimension of the metric head.
    pub embed_dim: usize,
    /// Number of fine classes the logits head scores.
    pub num_classes: usize,
}

impl NetConfig {
    /// Checks that every dimension is positive.
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::validation("input_dim must be positive"));
        }
        if self.embed_dim == 0 {
            return Err(Error::validation("embed_dim must be positive"));
        }
        if self.num_classes == 0 {
            return Err(Error::validation("num_classes must be positive"));
        }
        if self.hidden_dims.iter().any(|&d| d == 0) {
            return Err(Error::validation("hidden layer widths must be positive"));
        }
        Ok(())
    }

    /// Width of the trunk output the heads consume.
    pub fn trunk_output_dim(&self) -> usize {
        self.hidden_dims.last().copied().unwrap_or(self.input_dim)
    }

    /// `(rows, cols)` of every weight matrix in canonical order: trunk
    /// layers first, then the logits head, then the embedding head.
    fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden_dims.len() + 2);
        let mut fan_in = self.input_dim;
        for &width in &self.hidden_dims {
            shapes.push((width, fan_in));
            fan_in = width;
        }
        shapes.push((self.num_classes, fan_in));
        shapes.push((self.embed_dim, fan_in));
        shapes
    }
}

/// One affine layer: `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// Weight matrix, `output_dim x input_dim`.
    pub weights: Matrix,
    /// Bias vector, length `output_dim`.
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(rows: usize, cols: usize) -> Self {
        Layer { weights: Matrix::zeros(rows, cols), bias: vec![0.0; rows] }
    }

    fn glorot<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let mut weights = Matrix::zeros(rows, cols);
        for w in weights.data_mut() {
            *w = rng.random_range(-bound..bound);
        }
        Layer { weights, bias: vec![0.0; rows] }
    }

    fn shape(&self) -> (usize, usize) {
        (self.weights.rows(), self.weights.cols())
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.weights.matvec(x);
        axpy(&mut y, 1.0, &self.bias);
        y
    }
}

/// All trainable tensors: trunk layers plus the two heads.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    /// Rectified trunk layers, input side first.
    pub trunk: Vec<Layer>,
    /// Classification head.
    pub logits: Layer,
    /// Embedding head (output is normalized after this layer).
    pub embed: Layer,
}

impl Parameters {
    /// Seeded Glorot-uniform initialization: weights uniform in
    /// `[-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out)))`, biases
    /// zero. Draw order is fixed (trunk, logits head, embedding head; each
    /// matrix row-major), so a seed pins every weight.
    pub fn init<R: Rng>(config: &NetConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let shapes = config.layer_shapes();
        let n = shapes.len();
        let mut layers: Vec<Layer> =
            shapes.into_iter().map(|(r, c)| Layer::glorot(r, c, rng)).collect();
        let embed = layers.pop().expect("layer_shapes always yields the heads");
        let logits = layers.pop().expect("layer_shapes always yields the heads");
        debug_assert_eq!(layers.len(), n - 2);
        Ok(Parameters { trunk: layers, logits, embed })
    }

    /// Rebuilds parameters from explicit layers, checking shapes against
    /// the config and rejecting non-finite values (the load path for
    /// checkpoints).
    pub fn from_layers(
        config: &NetConfig,
        trunk: Vec<Layer>,
        logits: Layer,
        embed: Layer,
    ) -> Result<Self> {
        config.validate()?;
        if trunk.len() != config.hidden_dims.len() {
            return Err(Error::invalid(format!(
                "expected {} trunk layers, got {}",
                config.hidden_dims.len(),
                trunk.len()
            )));
        }
        let params = Parameters { trunk, logits, embed };
        let shapes = config.layer_shapes();
        for ((layer, name), &expect) in params.layers().zip(&shapes) {
            if layer.shape() != expect {
                return Err(Error::invalid(format!(
                    "layer {} has shape {:?}, expected {:?}",
                    name,
                    layer.shape(),
                    expect
                )));
            }
            if layer.bias.len() != expect.0 {
                return Err(Error::invalid(format!(
                    "layer {} has {} biases, expected {}",
                    name,
                    layer.bias.len(),
                    expect.0
                )));
            }
            let finite = layer.weights.data().iter().chain(&layer.bias).all(|v| v.is_finite());
            if !finite {
                return Err(Error::invalid(format!("layer {} contains non-finite values", name)));
            }
        }
        Ok(params)
    }

    /// Layers in canonical order with their names.
    pub fn layers(&self) -> impl Iterator<Item = (&Layer, String)> {
        let trunk = self.trunk.iter().enumerate().map(|(i, l)| (l, format!("trunk{}", i)));
        trunk
            .chain(core::iter::once((&self.logits, String::from("logits"))))
            .chain(core::iter::once((&self.embed, String::from("embed"))))
    }

    /// Flat views of every tensor in canonical order (each layer's weights
    /// then its bias). The order matches `GradientBuffer::tensors`, so the
    /// two can be zipped for parameter updates and perturbations.
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * (self.trunk.len() + 2));
        for layer in self.trunk.iter_mut().chain([&mut self.logits, &mut self.embed]) {
            out.push(layer.weights.data_mut());
            out.push(layer.bias.as_mut_slice());
        }
        out
    }

    /// Immutable counterpart of [`Parameters::tensors_mut`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * (self.trunk.len() + 2));
        for layer in self.trunk.iter().chain([&self.logits, &self.embed]) {
            out.push(layer.weights.data());
            out.push(layer.bias.as_slice());
        }
        out
    }

    /// Names for the tensors returned by [`Parameters::tensors`], in the
    /// same order.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(2 * (self.trunk.len() + 2));
        for (i, _) in self.trunk.iter().enumerate() {
            out.push(format!("trunk{}.w", i));
            out.push(format!("trunk{}.b", i));
        }
        for head in ["logits", "embed"] {
            out.push(format!("{}.w", head));
            out.push(format!("{}.b", head));
        }
        out
    }
}

/// Gradient accumulator shaped like [`Parameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBuffer {
    trunk: Vec<Layer>,
    logits: Layer,
    embed: Layer,
}

impl GradientBuffer {
    /// Zeroed buffer for the given architecture.
    pub fn zeros(config: &NetConfig) -> Self {
        let mut shapes = config.layer_shapes();
        let embed = shapes.pop().expect("layer_shapes always yields the heads");
        let logits = shapes.pop().expect("layer_shapes always yields the heads");
        GradientBuffer {
            trunk: shapes.into_iter().map(|(r, c)| Layer::zeros(r, c)).collect(),
            logits: Layer::zeros(logits.0, logits.1),
            embed: Layer::zeros(embed.0, embed.1),
        }
    }

    /// Resets every entry to zero, keeping the allocation.
    pub fn reset(&mut self) {
        for tensor in self.tensors_mut() {
            tensor.fill(0.0);
        }
    }

    /// Adds another buffer of the same shape into this one. This is the
    /// reduction step for data-parallel training: workers accumulate into
    /// private buffers and merge by summation.
    pub fn merge(&mut self, other: &GradientBuffer) -> Result<()> {
        let mut mine = self.tensors_mut();
        let theirs = other.tensors();
        if mine.len() != theirs.len()
            || mine.iter().zip(&theirs).any(|(a, b)| a.len() != b.len())
        {
            return Err(Error::invalid("gradient buffers have different shapes"));
        }
        for (dst, src) in mine.iter_mut().zip(&theirs) {
            axpy(dst, 1.0, src);
        }
        Ok(())
    }

    /// True if any accumulated entry is NaN or infinite.
    pub fn has_non_finite(&self) -> bool {
        self.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite()))
    }

    /// Flat views of every tensor, ordered exactly like
    /// [`Parameters::tensors`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * (self.trunk.len() + 2));
        for layer in self.trunk.iter().chain([&self.logits, &self.embed]) {
            out.push(layer.weights.data());
            out.push(layer.bias.as_slice());
        }
        out
    }

    /// Mutable counterpart of [`GradientBuffer::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * (self.trunk.len() + 2));
        for layer in self.trunk.iter_mut().chain([&mut self.logits, &mut self.embed]) {
            out.push(layer.weights.data_mut());
            out.push(layer.bias.as_mut_slice());
        }
        out
    }

    fn shape_matches(&self, params: &Parameters) -> bool {
        self.trunk.len() == params.trunk.len()
            && self
                .trunk
                .iter()
                .zip(&params.trunk)
                .all(|(g, p)| g.shape() == p.shape() && g.bias.len() == p.bias.len())
            && self.logits.shape() == params.logits.shape()
            && self.embed.shape() == params.embed.shape()
    }
}

/// Everything one forward pass caches for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// The input vector.
    pub input: Vec<f64>,
    /// Pre-activation of each trunk layer.
    pub pre_activations: Vec<Vec<f64>>,
    /// Rectified output of each trunk layer.
    pub activations: Vec<Vec<f64>>,
    /// Embedding before normalization.
    pub embed_pre: Vec<f64>,
    /// Norm of `embed_pre`; strictly positive.
    pub embed_norm: f64,
    /// Unit-norm embedding `y = z / ||z||`.
    pub embedding: Vec<f64>,
    /// Class scores.
    pub logits: Vec<f64>,
}

impl ForwardTrace {
    /// The trunk output both heads consumed.
    pub fn trunk_output(&self) -> &[f64] {
        self.activations.last().unwrap_or(&self.input)
    }
}

/// Runs the network on one input, caching intermediates for `backward`.
///
/// Fails on a dimension mismatch, a non-finite input, or an exactly-zero
/// pre-normalization embedding (which cannot be normalized).
pub fn forward(params: &Parameters, x: &[f64]) -> Result<ForwardTrace> {
    let expect = params
        .trunk
        .first()
        .map(|l| l.weights.cols())
        .unwrap_or_else(|| params.embed.weights.cols());
    if x.len() != expect {
        return Err(Error::invalid(format!(
            "input has length {}, network expects {}",
            x.len(),
            expect
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("input contains non-finite values"));
    }

    let mut pre_activations = Vec::with_capacity(params.trunk.len());
    let mut activations = Vec::with_capacity(params.trunk.len());
    let mut h: Vec<f64> = x.to_vec();
    for layer in &params.trunk {
        let pre = layer.affine(&h);
        h = pre.iter().map(|&a| if a > 0.0 { a } else { 0.0 }).collect();
        pre_activations.push(pre);
        activations.push(h.clone());
    }

    let logits = params.logits.affine(&h);
    let embed_pre = params.embed.affine(&h);
    let embed_norm = norm(&embed_pre);
    if embed_norm == 0.0 {
        return Err(Error::DegenerateEmbedding);
    }
    let embedding = embed_pre.iter().map(|&z| z / embed_norm).collect();

    Ok(ForwardTrace {
        input: x.to_vec(),
        pre_activations,
        activations,
        embed_pre,
        embed_norm,
        embedding,
        logits,
    })
}

/// Squared Euclidean distance between two unit vectors; equals
/// `2 - 2<a,b>` and lies in `[0, 4]`.
pub fn squared_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "distance between vectors of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    for v in [a, b] {
        let n = norm(v);
        if (n - 1.0).abs() > 1e-6 {
            return Err(Error::validation(format!(
                "squared_distance expects unit vectors, got norm {}",
                n
            )));
        }
    }
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    Ok(acc)
}

/// Accumulates `d(d_logits . logits + d_embedding . y) / d params` into
/// `grads`. Either upstream may be absent. Gradients add onto whatever the
/// buffer already holds, so one buffer can collect a whole batch.
pub fn backward(
    params: &Parameters,
    trace: &ForwardTrace,
    d_logits: Option<&[f64]>,
    d_embedding: Option<&[f64]>,
    grads: &mut GradientBuffer,
) -> Result<()> {
    if !grads.shape_matches(params) {
        return Err(Error::invalid("gradient buffer shape does not match parameters"));
    }
    if let Some(dl) = d_logits {
        if dl.len() != trace.logits.len() {
            return Err(Error::invalid(format!(
                "upstream logits gradient has length {}, expected {}",
                dl.len(),
                trace.logits.len()
            )));
        }
    }
    if let Some(de) = d_embedding {
        if de.len() != trace.embedding.len() {
            return Err(Error::invalid(format!(
                "upstream embedding gradient has length {}, expected {}",
                de.len(),
                trace.embedding.len()
            )));
        }
    }

    let trunk_out = trace.trunk_output();
    let mut d_hidden = vec![0.0; trunk_out.len()];

    if let Some(dl) = d_logits {
        grads.logits.weights.add_outer(1.0, dl, trunk_out);
        axpy(&mut grads.logits.bias, 1.0, dl);
        axpy(&mut d_hidden, 1.0, &params.logits.weights.matvec_transposed(dl));
    }
    if let Some(de) = d_embedding {
        // Through y = z/||z||: dz = (de - y (y . de)) / ||z||.
        let y = &trace.embedding;
        let radial = dot(y, de);
        let dz: Vec<f64> =
            y.iter().zip(de).map(|(&yi, &gi)| (gi - yi * radial) / trace.embed_norm).collect();
        grads.embed.weights.add_outer(1.0, &dz, trunk_out);
        axpy(&mut grads.embed.bias, 1.0, &dz);
        axpy(&mut d_hidden, 1.0, &params.embed.weights.matvec_transposed(&dz));
    }

    for idx in (0..params.trunk.len()).rev() {
        let pre = &trace.pre_activations[idx];
        // Rectifier subgradient: strictly positive pre-activations pass
        // the gradient, everything else (including exactly zero) blocks it.
        let d_pre: Vec<f64> =
            d_hidden.iter().zip(pre).map(|(&g, &a)| if a > 0.0 { g } else { 0.0 }).collect();
        let prev: &[f64] =
            if idx == 0 { &trace.input } else { &trace.activations[idx - 1] };
        grads.trunk[idx].weights.add_outer(1.0, &d_pre, prev);
        axpy(&mut grads.trunk[idx].bias, 1.0, &d_pre);
        d_hidden = params.trunk[idx].weights.matvec_transposed(&d_pre);
    }
    Ok(())
}
