use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::softmax_rows;
use super::{Layer, LayerSpec, Mode, NnError, Param, Tensor};

/// Layer lists for an optional image branch, an optional feature branch and
/// the head that consumes their concatenated outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    /// `[height, width, channels]` of the image input.
    pub image_input: Option<Vec<usize>>,
    pub image_layers: Vec<LayerSpec>,
    pub feature_input: Option<usize>,
    pub feature_layers: Vec<LayerSpec>,
    pub head_layers: Vec<LayerSpec>,
}

/// Output shape after every layer, per branch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchShapes {
    pub image: Vec<(LayerSpec, Vec<usize>)>,
    pub features: Vec<(LayerSpec, Vec<usize>)>,
    pub head_input: usize,
    pub head: Vec<(LayerSpec, Vec<usize>)>,
}

fn trace(input: &[usize], specs: &[LayerSpec]) -> Result<Vec<(LayerSpec, Vec<usize>)>, NnError> {
    let mut shape = input.to_vec();
    let mut out = Vec::with_capacity(specs.len());
    for spec in specs {
        shape = spec.output_shape(&shape)?;
        out.push((*spec, shape.clone()));
    }
    Ok(out)
}

fn flat_width(input: &[usize], trace: &[(LayerSpec, Vec<usize>)], branch: &str) -> Result<usize, NnError> {
    let last = trace.last().map(|(_, s)| s.as_slice()).unwrap_or(input);
    match last {
        [w] => Ok(*w),
        other => Err(NnError::Shape(format!("{branch} branch must end flat, ends at {other:?}"))),
    }
}

impl Architecture {
    /// Checks every adjacent pair of layers and returns the shape trace.
    pub fn shapes(&self) -> Result<BranchShapes, NnError> {
        if self.image_input.is_none() && self.feature_input.is_none() {
            return Err(NnError::Shape("model needs at least one input branch".into()));
        }
        let mut head_input = 0;
        let image = match &self.image_input {
            Some(inp) => {
                let t = trace(inp, &self.image_layers)?;
                head_input += flat_width(inp, &t, "image")?;
                t
            }
            None => Vec::new(),
        };
        let features = match self.feature_input {
            Some(n) => {
                let t = trace(&[n], &self.feature_layers)?;
                head_input += flat_width(&[n], &t, "feature")?;
                t
            }
            None => Vec::new(),
        };
        let head = trace(&[head_input], &self.head_layers)?;
        flat_width(&[head_input], &head, "head")?;
        Ok(BranchShapes {
            image,
            features,
            head_input,
            head,
        })
    }

    pub fn n_classes(&self) -> Result<usize, NnError> {
        let s = self.shapes()?;
        Ok(s.head.last().map(|(_, sh)| sh[0]).unwrap_or(s.head_input))
    }

    /// Total trainable scalar count.
    pub fn parameter_count(&self) -> Result<usize, NnError> {
        let mut m = Model::new(self.clone(), 0)?;
        Ok(m.params_mut().iter().map(|p| p.value.len()).sum())
    }
}

/// A chain of layers with known input shape.
#[derive(Debug, Clone)]
pub struct Sequential {
    pub input_shape: Vec<usize>,
    layers: Vec<Layer>,
}

impl Sequential {
    pub fn build(input_shape: &[usize], specs: &[LayerSpec], rng: &mut ChaCha8Rng) -> Result<Self, NnError> {
        let mut shape = input_shape.to_vec();
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            layers.push(Layer::build(spec, &shape, rng)?);
            shape = spec.output_shape(&shape)?;
        }
        Ok(Sequential {
            input_shape: input_shape.to_vec(),
            layers,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn forward(&mut self, input: &Tensor, mode: Mode, rng: &mut ChaCha8Rng) -> Result<Tensor, NnError> {
        if input.shape().get(1..) != Some(self.input_shape.as_slice()) {
            return Err(NnError::Shape(format!(
                "input {:?} does not match expected [b, {:?}]",
                input.shape(),
                self.input_shape
            )));
        }
        let mut x = input.clone();
        for layer in &mut self.layers {
            x = layer.forward(&x, mode, rng)?;
        }
        Ok(x)
    }

    pub fn backward(&mut self, grad: &Tensor) -> Result<Tensor, NnError> {
        let mut g = grad.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    pub fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }
}

/// Inputs for one batch; a branch the model lacks ignores its tensor.
#[derive(Debug, Clone, Copy, Default)]
pub struct Inputs<'a> {
    pub image: Option<&'a Tensor>,
    pub features: Option<&'a Tensor>,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub architecture: Architecture,
    pub seed: u64,
    image: Option<Sequential>,
    features: Option<Sequential>,
    /// Head without a trailing softmax; the loss applies it.
    head: Sequential,
    head_softmax: bool,
    branch_widths: (usize, usize),
    dropout_rng: ChaCha8Rng,
}

impl Model {
    /// Builds the model with Glorot-uniform weights and zero biases drawn from
    /// `seed` in parameter order (image branch, feature branch, head).
    pub fn new(architecture: Architecture, seed: u64) -> Result<Self, NnError> {
        let shapes = architecture.shapes()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let image = architecture
            .image_input
            .as_ref()
            .map(|inp| Sequential::build(inp, &architecture.image_layers, &mut rng))
            .transpose()?;
        let features = architecture
            .feature_input
            .map(|n| Sequential::build(&[n], &architecture.feature_layers, &mut rng))
            .transpose()?;
        let mut head_specs = architecture.head_layers.clone();
        let head_softmax = head_specs.last() == Some(&LayerSpec::Softmax);
        if head_softmax {
            head_specs.pop();
        }
        if head_specs.contains(&LayerSpec::Softmax) {
            return Err(NnError::Layer("softmax is only allowed as the final head layer".into()));
        }
        let head = Sequential::build(&[shapes.head_input], &head_specs, &mut rng)?;
        let width = |t: &[(LayerSpec, Vec<usize>)], inp: usize| t.last().map(|(_, s)| s[0]).unwrap_or(inp);
        let branch_widths = (
            image.as_ref().map_or(0, |_| {
                let inp: usize = architecture.image_input.as_ref().unwrap().iter().product();
                width(&shapes.image, inp)
            }),
            architecture.feature_input.map_or(0, |n| width(&shapes.features, n)),
        );
        Ok(Model {
            architecture,
            seed,
            image,
            features,
            head,
            head_softmax,
            branch_widths,
            dropout_rng: ChaCha8Rng::seed_from_u64(seed ^ 0xD80F0u64),
        })
    }

    pub fn has_image_branch(&self) -> bool {
        self.image.is_some()
    }

    pub fn has_feature_branch(&self) -> bool {
        self.features.is_some()
    }

    pub fn reseed_dropout(&mut self, seed: u64) {
        self.dropout_rng = ChaCha8Rng::seed_from_u64(seed);
    }

    pub fn n_classes(&self) -> usize {
        self.architecture.n_classes().expect("validated at construction")
    }

    /// Pre-softmax outputs, `[b, classes]`.
    pub fn forward_logits(&mut self, inputs: Inputs<'_>, mode: Mode) -> Result<Tensor, NnError> {
        let rng = &mut self.dropout_rng;
        let mut parts = Vec::new();
        if let Some(branch) = &mut self.image {
            let x = inputs
                .image
                .ok_or_else(|| NnError::Shape("model has an image branch but no image input".into()))?;
            parts.push(branch.forward(x, mode, rng)?);
        }
        if let Some(branch) = &mut self.features {
            let x = inputs
                .features
                .ok_or_else(|| NnError::Shape("model has a feature branch but no feature input".into()))?;
            parts.push(branch.forward(x, mode, rng)?);
        }
        let joined = concat(&parts)?;
        self.head.forward(&joined, mode, rng)
    }

    /// Softmax probabilities in eval mode.
    pub fn predict_proba(&mut self, inputs: Inputs<'_>) -> Result<Tensor, NnError> {
        let logits = self.forward_logits(inputs, Mode::Eval)?;
        let k = logits.item_len();
        if self.head_softmax {
            Tensor::new(logits.shape().to_vec(), softmax_rows(logits.data(), k))
        } else {
            Ok(logits)
        }
    }

    /// Back-propagates `d loss / d logits` through the last training forward.
    pub fn backward(&mut self, grad_logits: &Tensor) -> Result<(), NnError> {
        let g = self.head.backward(grad_logits)?;
        let b = g.batch();
        let (wi, wf) = self.branch_widths;
        let total = wi + wf;
        if let Some(branch) = &mut self.image {
            let data: Vec<f64> = g.data().chunks(total).flat_map(|r| r[..wi].to_vec()).collect();
            branch.backward(&Tensor::new(vec![b, wi], data)?)?;
        }
        if let Some(branch) = &mut self.features {
            let data: Vec<f64> = g.data().chunks(total).flat_map(|r| r[wi..].to_vec()).collect();
            branch.backward(&Tensor::new(vec![b, wf], data)?)?;
        }
        Ok(())
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut out = Vec::new();
        if let Some(b) = &self.image {
            out.extend(b.params());
        }
        if let Some(b) = &self.features {
            out.extend(b.params());
        }
        out.extend(self.head.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = Vec::new();
        if let Some(b) = &mut self.image {
            out.extend(b.params_mut());
        }
        if let Some(b) = &mut self.features {
            out.extend(b.params_mut());
        }
        out.extend(self.head.params_mut());
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Copies every parameter array, in parameter order.
    pub fn snapshot(&self) -> Vec<Vec<f64>> {
        self.params().iter().map(|p| p.value.clone()).collect()
    }

    pub fn restore(&mut self, values: &[Vec<f64>]) -> Result<(), NnError> {
        let mut params = self.params_mut();
        if params.len() != values.len() {
            return Err(NnError::Shape(format!(
                "snapshot has {} arrays, model has {}",
                values.len(),
                params.len()
            )));
        }
        for (p, v) in params.iter_mut().zip(values) {
            if p.value.len() != v.len() {
                return Err(NnError::Shape("snapshot array length mismatch".into()));
            }
            p.value.copy_from_slice(v);
        }
        Ok(())
    }
}

fn concat(parts: &[Tensor]) -> Result<Tensor, NnError> {
    if parts.len() == 1 {
        return Ok(parts[0].clone());
    }
    let b = parts[0].batch();
    if parts.iter().any(|p| p.batch() != b) {
        return Err(NnError::Shape("branch inputs have different batch sizes".into()));
    }
    let width: usize = parts.iter().map(|p| p.item_len()).sum();
    let mut data = Vec::with_capacity(b * width);
    for i in 0..b {
        for p in parts {
            data.extend_from_slice(p.item(i));
        }
    }
    Tensor::new(vec![b, width], data)
}
