use super::{GraphBuilder, LayerGraph};
use crate::error::{Error, Result};

const PRESETS: &[&str] = &["toy3", "toy4", "vgg16", "vgg19", "resnet34"];

/// Input resolution used for the full-size architectures.
pub const LARGE_INPUT: (usize, usize, usize) = (320, 320, 3);

pub fn preset_names() -> Vec<String> {
    PRESETS.iter().map(|s| s.to_string()).collect()
}

/// Compiled-in architectures, looked up case-insensitively.
pub fn preset(name: &str) -> Result<LayerGraph> {
    match name.to_ascii_lowercase().as_str() {
        "toy3" => toy3(),
        "toy4" => toy4(),
        "vgg16" => vgg("vgg16", &[2, 2, 3, 3, 3]),
        "vgg19" => vgg("vgg19", &[2, 2, 4, 4, 4]),
        "resnet34" => resnet34(),
        _ => Err(Error::NotFound {
            what: format!("preset '{name}'"),
            valid: preset_names(),
        }),
    }
}

fn toy3() -> Result<LayerGraph> {
    GraphBuilder::new("toy3", (32, 32, 3))
        .conv(3, 16, 1)?
        .conv(3, 16, 2)?
        .conv(3, 32, 2)?
        .fc(10)?
        .build()
}

fn toy4() -> Result<LayerGraph> {
    GraphBuilder::new("toy4", (32, 32, 3))
        .conv(3, 16, 1)?
        .conv(3, 16, 2)?
        .conv(3, 32, 2)?
        .conv(3, 32, 2)?
        .fc(10)?
        .build()
}

fn vgg(name: &str, convs_per_stage: &[usize]) -> Result<LayerGraph> {
    let widths = [64, 128, 256, 512, 512];
    let mut b = GraphBuilder::new(name, LARGE_INPUT);
    for (&n, &w) in convs_per_stage.iter().zip(widths.iter()) {
        for _ in 0..n {
            b = b.conv(3, w, 1)?;
        }
        b = b.pool(2, 2)?;
    }
    b.global_pool().flatten().fc(10)?.build()
}

fn resnet34() -> Result<LayerGraph> {
    let mut b = GraphBuilder::new("resnet34", LARGE_INPUT)
        .conv_padded(7, 64, 2, 3)?
        .pool_padded(3, 2, 1)?;
    let stages = [(3, 64), (4, 128), (6, 256), (3, 512)];
    for (s, &(blocks, width)) in stages.iter().enumerate() {
        for k in 0..blocks {
            let stride = if s > 0 && k == 0 { 2 } else { 1 };
            let skip = b.len() - 1;
            b = b
                .conv(3, width, stride)?
                .conv(3, width, 1)?
                .residual(skip)?;
        }
    }
    b.global_pool().flatten().fc(10)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::LayerKind;

    #[test]
    fn conv_counts() {
        assert_eq!(preset("vgg16").unwrap().conv_count(), 13);
        assert_eq!(preset("vgg19").unwrap().conv_count(), 16);
        assert_eq!(preset("resnet34").unwrap().conv_count(), 33);
        assert_eq!(preset("toy3").unwrap().conv_count(), 3);
        assert_eq!(preset("toy4").unwrap().conv_count(), 4);
    }

    #[test]
    fn input_shapes() {
        for name in ["vgg16", "vgg19", "resnet34"] {
            assert_eq!(preset(name).unwrap().input_shape, (320, 320, 3));
        }
        assert_eq!(preset("toy3").unwrap().input_shape, (32, 32, 3));
    }

    #[test]
    fn single_final_fc() {
        for name in preset_names() {
            let g = preset(&name).unwrap();
            let fcs: Vec<_> = g
                .layers
                .iter()
                .filter(|l| l.kind == LayerKind::FullyConnected)
                .collect();
            assert_eq!(fcs.len(), 1, "{name}");
            assert_eq!(g.layers.last().unwrap().kind, LayerKind::FullyConnected);
        }
    }

    #[test]
    fn toy3_second_conv_output() {
        let g = preset("toy3").unwrap();
        assert_eq!(g.layers[1].out_spatial, (16, 16));
        assert_eq!(g.layers[1].out_channels, 16);
        assert_eq!(g.output_bytes(1), 16_384);
        assert_eq!(g.len(), 4);
    }

    #[test]
    fn vgg16_shapes() {
        let g = preset("vgg16").unwrap();
        assert_eq!(g.output_bytes(0), 64 * 320 * 320 * 4);
        let last_pool = g.len() - 4;
        assert_eq!(g.layers[last_pool].out_spatial, (10, 10));
        assert_eq!(g.layers[g.len() - 1].in_channels, 512);
    }

    #[test]
    fn resnet34_shapes() {
        let g = preset("resnet34").unwrap();
        assert_eq!(g.layers[0].out_spatial, (160, 160));
        assert_eq!(g.layers[1].out_spatial, (80, 80));
        let gp = g.len() - 3;
        assert_eq!(g.layers[gp - 1].out_spatial, (10, 10));
        assert_eq!(g.layers[gp - 1].out_channels, 512);
    }

    #[test]
    fn unknown_preset_lists_valid_names() {
        let err = preset("alexnet").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::NotFound { .. }));
        for name in PRESETS {
            assert!(msg.contains(name), "{msg}");
        }
    }
}
