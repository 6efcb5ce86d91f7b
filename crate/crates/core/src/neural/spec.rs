use serde::{Deserialize, Serialize};

use super::NeuralError;

/// One layer of a sequential model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    Conv { out_channels: usize, kernel: usize, stride: usize, padding: usize },
    MaxPool { size: usize, stride: usize },
    Relu,
    Flatten,
    Dense { units: usize },
    Softmax,
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv { .. } => "conv",
            Layer::MaxPool { .. } => "maxpool",
            Layer::Relu => "relu",
            Layer::Flatten => "flatten",
            Layer::Dense { .. } => "dense",
            Layer::Softmax => "softmax",
        }
    }
}

/// Activation shape, channel-first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width }
    }

    pub fn flat(len: usize) -> Self {
        Self::new(len, 1, 1)
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

/// Sequential architecture. `input_shape` is `(height, width, channels)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub input_shape: (usize, usize, usize),
    pub num_classes: usize,
    pub layers: Vec<Layer>,
}

impl ModelSpec {
    pub fn new(
        input_shape: (usize, usize, usize),
        num_classes: usize,
        layers: Vec<Layer>,
    ) -> Result<Self, NeuralError> {
        let spec = Self { input_shape, num_classes, layers };
        spec.validate()?;
        Ok(spec)
    }

    /// Three conv3×3/ReLU/maxpool2 blocks, then dense 256 → dense classes → softmax.
    pub fn mini_vgg(height: usize, width: usize, channels: usize, num_classes: usize) -> Result<Self, NeuralError> {
        let mut layers = Vec::new();
        for out_channels in [8, 16, 16] {
            layers.extend([
                Layer::Conv { out_channels, kernel: 3, stride: 1, padding: 1 },
                Layer::Relu,
                Layer::MaxPool { size: 2, stride: 2 },
            ]);
        }
        layers.extend(head(num_classes));
        Self::new((height, width, channels), num_classes, layers)
    }

    /// Two wide-kernel conv blocks (7×7 stride 2, then 5×5) with overlapping
    /// 3/2 pooling, same dense head as [`ModelSpec::mini_vgg`].
    pub fn mini_alexnet(height: usize, width: usize, channels: usize, num_classes: usize) -> Result<Self, NeuralError> {
        let mut layers = vec![
            Layer::Conv { out_channels: 12, kernel: 7, stride: 2, padding: 3 },
            Layer::Relu,
            Layer::MaxPool { size: 3, stride: 2 },
            Layer::Conv { out_channels: 24, kernel: 5, stride: 1, padding: 2 },
            Layer::Relu,
            Layer::MaxPool { size: 3, stride: 2 },
        ];
        layers.extend(head(num_classes));
        Self::new((height, width, channels), num_classes, layers)
    }

    pub fn preset(
        name: &str,
        height: usize,
        width: usize,
        channels: usize,
        num_classes: usize,
    ) -> Result<Self, NeuralError> {
        match name {
            "mini-vgg" => Self::mini_vgg(height, width, channels, num_classes),
            "mini-alexnet" => Self::mini_alexnet(height, width, channels, num_classes),
            other => Err(NeuralError::Spec(format!("unknown preset `{other}` (expected mini-vgg or mini-alexnet)"))),
        }
    }

    pub fn input(&self) -> Shape {
        let (h, w, c) = self.input_shape;
        Shape::new(c, h, w)
    }

    /// Input shape of every layer followed by the output shape.
    pub fn shapes(&self) -> Result<Vec<Shape>, NeuralError> {
        let mut shapes = vec![self.input()];
        let mut cur = self.input();
        let mut flat = false;
        for (i, layer) in self.layers.iter().enumerate() {
            let bad = |msg: String| NeuralError::Spec(format!("layer {i} ({}): {msg}", layer.name()));
            cur = match *layer {
                Layer::Conv { out_channels, kernel, stride, padding } => {
                    if flat {
                        return Err(bad("spatial layer after flatten".into()));
                    }
                    if out_channels == 0 || kernel == 0 || stride == 0 {
                        return Err(bad("channels, kernel and stride must be positive".into()));
                    }
                    let (ph, pw) = (cur.height + 2 * padding, cur.width + 2 * padding);
                    if kernel > ph || kernel > pw {
                        return Err(bad(format!("kernel {kernel} larger than padded input {ph}x{pw}")));
                    }
                    Shape::new(out_channels, (ph - kernel) / stride + 1, (pw - kernel) / stride + 1)
                }
                Layer::MaxPool { size, stride } => {
                    if flat {
                        return Err(bad("spatial layer after flatten".into()));
                    }
                    if size == 0 || stride == 0 {
                        return Err(bad("size and stride must be positive".into()));
                    }
                    if size > cur.height || size > cur.width {
                        return Err(bad(format!("window {size} larger than input {cur}")));
                    }
                    Shape::new(cur.channels, (cur.height - size) / stride + 1, (cur.width - size) / stride + 1)
                }
                Layer::Relu => cur,
                Layer::Flatten => {
                    flat = true;
                    Shape::flat(cur.len())
                }
                Layer::Dense { units } => {
                    if units == 0 {
                        return Err(bad("units must be positive".into()));
                    }
                    if cur.height * cur.width != 1 {
                        return Err(bad(format!("expects a flat input, got {cur}; add a flatten layer")));
                    }
                    flat = true;
                    Shape::flat(units)
                }
                Layer::Softmax => {
                    if i + 1 != self.layers.len() {
                        return Err(bad("softmax must be the final layer".into()));
                    }
                    cur
                }
            };
            shapes.push(cur);
        }
        Ok(shapes)
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let (h, w, c) = self.input_shape;
        if h == 0 || w == 0 || c == 0 {
            return Err(NeuralError::Spec("input shape must be positive".into()));
        }
        if self.num_classes < 2 {
            return Err(NeuralError::Spec("need at least two classes".into()));
        }
        let n = self.layers.len();
        let tail_ok = n >= 2
            && self.layers[n - 2] == Layer::Dense { units: self.num_classes }
            && self.layers[n - 1] == Layer::Softmax;
        if !tail_ok {
            return Err(NeuralError::Spec(format!(
                "final layers must be dense({}) followed by softmax",
                self.num_classes
            )));
        }
        self.shapes().map(|_| ())
    }

    /// `(weights, bias)` lengths per layer; zero for parameter-free layers.
    pub fn param_sizes(&self) -> Result<Vec<(usize, usize)>, NeuralError> {
        let shapes = self.shapes()?;
        Ok(self
            .layers
            .iter()
            .enumerate()
            .map(|(i, layer)| match *layer {
                Layer::Conv { out_channels, kernel, .. } => {
                    (out_channels * shapes[i].channels * kernel * kernel, out_channels)
                }
                Layer::Dense { units } => (units * shapes[i].len(), units),
                _ => (0, 0),
            })
            .collect())
    }

    pub fn num_parameters(&self) -> Result<usize, NeuralError> {
        Ok(self.param_sizes()?.iter().map(|(w, b)| w + b).sum())
    }
}

fn head(num_classes: usize) -> [Layer; 5] {
    [Layer::Flatten, Layer::Dense { units: 256 }, Layer::Relu, Layer::Dense { units: num_classes }, Layer::Softmax]
}
