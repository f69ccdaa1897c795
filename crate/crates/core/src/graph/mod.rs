//! Convolutional network architectures as flat layer sequences.
//!
//! A [`LayerGraph`] tracks shapes and costs only: channel counts, kernel
//! sizes, strides and spatial sizes. Pruning a graph rewrites channel
//! counts; it never touches spatial sizes.

mod presets;
mod text;

pub use presets::{preset, preset_names};

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on any single pruning rate unless configured otherwise.
pub const DEFAULT_R_MAX: f64 = 0.9;

/// Feature tensors are 32-bit floats.
pub const BYTES_PER_ELEMENT: u64 = 4;

// Absorbs representation error in products like (1 - 0.7) * 10 before `ceil`.
const CEIL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LayerKind {
    Conv,
    Pool,
    FullyConnected,
    ResidualAdd,
    Flatten,
}

impl LayerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Conv => "conv",
            LayerKind::Pool => "pool",
            LayerKind::FullyConnected => "fc",
            LayerKind::ResidualAdd => "add",
            LayerKind::Flatten => "flatten",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerDesc {
    pub kind: LayerKind,
    /// (h, w); (1, 1) for kinds without a kernel.
    pub kernel: (usize, usize),
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
    pub padding: usize,
    pub in_spatial: (usize, usize),
    pub out_spatial: (usize, usize),
    /// For `ResidualAdd`: index of the layer whose output feeds the skip path.
    pub skip_from: Option<usize>,
}

impl LayerDesc {
    pub fn output_elements(&self) -> u64 {
        self.out_channels as u64 * self.out_spatial.0 as u64 * self.out_spatial.1 as u64
    }
}

/// Rounds a channel count after removing a fraction `rate` of it.
///
/// `ceil((1 - rate) * channels)`, never below one channel.
pub fn pruned_channels(channels: usize, rate: f64) -> usize {
    let kept = ((1.0 - rate) * channels as f64 - CEIL_SLACK).ceil();
    (kept.max(1.0) as usize).min(channels.max(1))
}

/// One pruning rate per convolutional layer, in layer order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneVector {
    pub rates: Vec<f64>,
}

impl PruneVector {
    pub fn new(rates: Vec<f64>) -> Self {
        PruneVector { rates }
    }

    pub fn zeros(n: usize) -> Self {
        PruneVector {
            rates: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    /// Checks length against `conv_count` and every rate against `[0, r_max]`.
    pub fn check(&self, conv_count: usize, r_max: f64) -> Result<()> {
        if self.rates.len() != conv_count {
            return Err(Error::domain(format!(
                "prune vector has {} rates but the graph has {} conv layers",
                self.rates.len(),
                conv_count
            )));
        }
        for (i, &r) in self.rates.iter().enumerate() {
            if !(0.0..=r_max).contains(&r) {
                return Err(Error::domain(format!(
                    "rate {r} for conv layer {i} outside [0, {r_max}]"
                )));
            }
        }
        Ok(())
    }
}

/// A partition point plus one pruning rate per conv layer.
///
/// Layers `[0, partition)` run on the edge device, the rest in the cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub partition: usize,
    pub prune: PruneVector,
}

impl Plan {
    pub fn check(&self, graph: &LayerGraph, r_max: f64) -> Result<()> {
        if self.partition > graph.layers.len() {
            return Err(Error::domain(format!(
                "partition {} outside [0, {}]",
                self.partition,
                graph.layers.len()
            )));
        }
        self.prune.check(graph.conv_count(), r_max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerGraph {
    pub name: String,
    /// (H, W, C)
    pub input_shape: (usize, usize, usize),
    pub layers: Vec<LayerDesc>,
    pub conv_indices: Vec<usize>,
}

impl LayerGraph {
    pub fn conv_count(&self) -> usize {
        self.conv_indices.len()
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn input_elements(&self) -> u64 {
        let (h, w, c) = self.input_shape;
        (h * w * c) as u64
    }

    /// Channels and spatial size feeding layer `i`.
    fn source_shape(&self, i: usize) -> (usize, (usize, usize)) {
        if i == 0 {
            let (h, w, c) = self.input_shape;
            (c, (h, w))
        } else {
            let prev = &self.layers[i - 1];
            (prev.out_channels, prev.out_spatial)
        }
    }

    pub fn layer_flops(&self, i: usize) -> u64 {
        let l = &self.layers[i];
        let (kh, kw) = (l.kernel.0 as u64, l.kernel.1 as u64);
        let (ho, wo) = (l.out_spatial.0 as u64, l.out_spatial.1 as u64);
        let cin = l.in_channels as u64;
        let cout = l.out_channels as u64;
        match l.kind {
            LayerKind::Conv => 2 * kh * kw * cin * cout * ho * wo,
            LayerKind::FullyConnected => 2 * cin * cout,
            LayerKind::Pool => kh * kw * cout * ho * wo,
            LayerKind::Flatten => 0,
            LayerKind::ResidualAdd => {
                let add = cout * ho * wo;
                let (skip_c, skip_hw) = self.skip_shape(i);
                if skip_c != l.out_channels || skip_hw != l.out_spatial {
                    // 1x1 projection on the skip path
                    add + 2 * skip_c as u64 * cout * ho * wo
                } else {
                    add
                }
            }
        }
    }

    fn skip_shape(&self, i: usize) -> (usize, (usize, usize)) {
        match self.layers[i].skip_from {
            Some(j) => (self.layers[j].out_channels, self.layers[j].out_spatial),
            None => {
                let (h, w, c) = self.input_shape;
                (c, (h, w))
            }
        }
    }

    pub fn output_bytes(&self, i: usize) -> u64 {
        self.layers[i].output_elements() * BYTES_PER_ELEMENT
    }

    /// Bytes crossing the link when the graph is split before layer `partition`.
    ///
    /// The raw input for `partition == 0`. The final output for an all-edge split.
    pub fn transfer_bytes(&self, partition: usize) -> u64 {
        if partition == 0 {
            self.input_elements() * BYTES_PER_ELEMENT
        } else {
            self.output_bytes(partition - 1)
        }
    }

    /// Channel count of the tensor crossing the split at `partition`.
    pub fn transfer_channels(&self, partition: usize) -> usize {
        self.source_shape(partition.min(self.layers.len())).0
    }

    pub fn flops_range(&self, range: Range<usize>) -> u64 {
        range.map(|i| self.layer_flops(i)).sum()
    }

    pub fn total_flops(&self) -> u64 {
        self.flops_range(0..self.layers.len())
    }

    /// Split points that never cut a residual block, excluding the all-edge split.
    pub fn admissible_partitions(&self) -> Vec<usize> {
        (0..self.layers.len())
            .filter(|&p| !self.splits_residual(p))
            .collect()
    }

    fn splits_residual(&self, p: usize) -> bool {
        self.layers.iter().enumerate().any(|(j, l)| {
            l.kind == LayerKind::ResidualAdd && {
                let block_start = l.skip_from.map_or(0, |s| s + 1);
                block_start < p && p <= j
            }
        })
    }

    /// Applies per-conv pruning rates and propagates channel counts downstream.
    pub fn apply_prune(&self, prune: &PruneVector, r_max: f64) -> Result<LayerGraph> {
        prune.check(self.conv_count(), r_max)?;
        let mut out = self.clone();
        for (slot, &li) in self.conv_indices.iter().enumerate() {
            out.layers[li].out_channels =
                pruned_channels(self.layers[li].out_channels, prune.rates[slot]);
        }
        out.propagate_channels();
        Ok(out)
    }

    fn propagate_channels(&mut self) {
        for i in 0..self.layers.len() {
            let (src_c, (sh, sw)) = self.source_shape(i);
            let l = &mut self.layers[i];
            match l.kind {
                LayerKind::Conv => l.in_channels = src_c,
                LayerKind::Pool | LayerKind::ResidualAdd => {
                    l.in_channels = src_c;
                    l.out_channels = src_c;
                }
                LayerKind::Flatten => {
                    l.in_channels = src_c;
                    l.out_channels = src_c * sh * sw;
                }
                LayerKind::FullyConnected => l.in_channels = src_c * sh * sw,
            }
        }
    }

    /// Checks the structural invariants: conv index list, channel chaining
    /// and spatial consistency.
    pub fn validate(&self) -> Result<()> {
        let convs: Vec<usize> = self
            .layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.kind == LayerKind::Conv)
            .map(|(i, _)| i)
            .collect();
        if convs != self.conv_indices {
            return Err(Error::domain("conv_indices do not match conv layers"));
        }
        for (i, l) in self.layers.iter().enumerate() {
            let (src_c, src_hw) = self.source_shape(i);
            let expect_in = match l.kind {
                LayerKind::Flatten | LayerKind::FullyConnected => src_c * src_hw.0 * src_hw.1,
                _ => src_c,
            };
            let in_ok = match l.kind {
                LayerKind::Flatten => l.in_channels == src_c && l.out_channels == expect_in,
                _ => l.in_channels == expect_in,
            };
            if !in_ok {
                return Err(Error::domain(format!("layer {i}: channel mismatch")));
            }
            if l.in_spatial != src_hw {
                return Err(Error::domain(format!("layer {i}: spatial mismatch")));
            }
            if l.out_channels == 0 || l.out_spatial.0 == 0 || l.out_spatial.1 == 0 {
                return Err(Error::domain(format!("layer {i}: empty output")));
            }
            if let Some(j) = l.skip_from {
                if j >= i {
                    return Err(Error::domain(format!(
                        "layer {i}: skip source {j} not upstream"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Reads the line-oriented architecture format.
    pub fn from_text(text: &str) -> Result<LayerGraph> {
        text::parse(text)
    }

    pub fn to_text(&self) -> String {
        text::render(self)
    }
}

fn conv_out(size: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
    let padded = size + 2 * padding;
    if padded < kernel || stride == 0 {
        return Err(Error::domain(format!(
            "kernel {kernel} / stride {stride} do not fit input size {size} with padding {padding}"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

/// Incremental construction with shape inference.
#[derive(Debug, Clone)]
pub struct GraphBuilder {
    graph: LayerGraph,
}

impl GraphBuilder {
    pub fn new(name: impl Into<String>, input_shape: (usize, usize, usize)) -> Self {
        GraphBuilder {
            graph: LayerGraph {
                name: name.into(),
                input_shape,
                layers: Vec::new(),
                conv_indices: Vec::new(),
            },
        }
    }

    pub fn len(&self) -> usize {
        self.graph.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graph.layers.is_empty()
    }

    fn current(&self) -> (usize, (usize, usize)) {
        self.graph.source_shape(self.graph.layers.len())
    }

    pub fn conv(self, kernel: usize, out_channels: usize, stride: usize) -> Result<Self> {
        self.conv_padded(kernel, out_channels, stride, kernel / 2)
    }

    pub fn conv_padded(
        mut self,
        kernel: usize,
        out_channels: usize,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        if out_channels == 0 {
            return Err(Error::domain(
                "conv layer needs at least one output channel",
            ));
        }
        let (c, (h, w)) = self.current();
        let out = (
            conv_out(h, kernel, stride, padding)?,
            conv_out(w, kernel, stride, padding)?,
        );
        self.graph.conv_indices.push(self.graph.layers.len());
        self.graph.layers.push(LayerDesc {
            kind: LayerKind::Conv,
            kernel: (kernel, kernel),
            in_channels: c,
            out_channels,
            stride,
            padding,
            in_spatial: (h, w),
            out_spatial: out,
            skip_from: None,
        });
        Ok(self)
    }

    pub fn pool(self, kernel: usize, stride: usize) -> Result<Self> {
        self.pool_padded(kernel, stride, 0)
    }

    pub fn pool_padded(mut self, kernel: usize, stride: usize, padding: usize) -> Result<Self> {
        let (c, (h, w)) = self.current();
        let out = (
            conv_out(h, kernel, stride, padding)?,
            conv_out(w, kernel, stride, padding)?,
        );
        self.graph.layers.push(LayerDesc {
            kind: LayerKind::Pool,
            kernel: (kernel, kernel),
            in_channels: c,
            out_channels: c,
            stride,
            padding,
            in_spatial: (h, w),
            out_spatial: out,
            skip_from: None,
        });
        Ok(self)
    }

    /// Pools the whole feature map down to 1x1.
    pub fn global_pool(mut self) -> Self {
        let (c, (h, w)) = self.current();
        self.graph.layers.push(LayerDesc {
            kind: LayerKind::Pool,
            kernel: (h, w),
            in_channels: c,
            out_channels: c,
            stride: h.max(w),
            padding: 0,
            in_spatial: (h, w),
            out_spatial: (1, 1),
            skip_from: None,
        });
        self
    }

    /// Joins the main path with the output of layer `skip_from`.
    pub fn residual(mut self, skip_from: usize) -> Result<Self> {
        if skip_from >= self.graph.layers.len() {
            return Err(Error::domain(format!(
                "skip source {skip_from} is not an existing layer"
            )));
        }
        let (c, hw) = self.current();
        self.graph.layers.push(LayerDesc {
            kind: LayerKind::ResidualAdd,
            kernel: (1, 1),
            in_channels: c,
            out_channels: c,
            stride: 1,
            padding: 0,
            in_spatial: hw,
            out_spatial: hw,
            skip_from: Some(skip_from),
        });
        Ok(self)
    }

    pub fn flatten(mut self) -> Self {
        let (c, (h, w)) = self.current();
        self.graph.layers.push(LayerDesc {
            kind: LayerKind::Flatten,
            kernel: (1, 1),
            in_channels: c,
            out_channels: c * h * w,
            stride: 1,
            padding: 0,
            in_spatial: (h, w),
            out_spatial: (1, 1),
            skip_from: None,
        });
        self
    }

    pub fn fc(mut self, out_features: usize) -> Result<Self> {
        if out_features == 0 {
            return Err(Error::domain(
                "fully connected layer needs at least one output",
            ));
        }
        let (c, (h, w)) = self.current();
        self.graph.layers.push(LayerDesc {
            kind: LayerKind::FullyConnected,
            kernel: (1, 1),
            in_channels: c * h * w,
            out_channels: out_features,
            stride: 1,
            padding: 0,
            in_spatial: (h, w),
            out_spatial: (1, 1),
            skip_from: None,
        });
        Ok(self)
    }

    pub fn build(self) -> Result<LayerGraph> {
        if self.graph.layers.is_empty() {
            return Err(Error::domain("graph has no layers"));
        }
        self.graph.validate()?;
        Ok(self.graph)
    }
}
