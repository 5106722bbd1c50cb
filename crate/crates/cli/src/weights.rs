//! Weight files: a one-line JSON header naming each tensor, a newline,
//! then the concatenated little-endian f32 payloads in header order.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use coconv_core::network::{LayerKind, NetworkSpec};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightHeader {
    pub entries: Vec<WeightEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
}

type NamedTensor = (String, Vec<usize>, Vec<f32>);

fn collect_tensors(net: &NetworkSpec) -> Result<Vec<NamedTensor>> {
    let mut out = Vec::new();
    let mut missing = Vec::new();
    net.for_each_layer(&mut |layer| {
        let mut push = |suffix: &str, shape: Vec<usize>, data: Option<&Vec<f32>>| {
            let name = if suffix.is_empty() {
                layer.name.clone()
            } else {
                format!("{}.{suffix}", layer.name)
            };
            match data {
                Some(d) => out.push((name, shape, d.clone())),
                None => missing.push(name),
            }
        };
        match &layer.kind {
            LayerKind::Conv3d(c) => {
                push(
                    "weight",
                    vec![
                        c.out_channels,
                        c.in_channels / c.groups,
                        c.temporal.kernel,
                        c.spatial_h.kernel,
                        c.spatial_w.kernel,
                    ],
                    c.weights.as_ref(),
                );
                if c.has_bias {
                    push("bias", vec![c.out_channels], c.bias.as_ref());
                }
            }
            LayerKind::Norm(n) => {
                let c = n.channels();
                out.push((format!("{}.scale", layer.name), vec![c], n.scale.clone()));
                out.push((format!("{}.shift", layer.name), vec![c], n.shift.clone()));
                out.push((format!("{}.mean", layer.name), vec![c], n.mean.clone()));
                out.push((format!("{}.var", layer.name), vec![c], n.var.clone()));
            }
            LayerKind::Se(s) => {
                push("fc1.weight", vec![s.hidden, s.channels], s.w1.as_ref());
                push("fc1.bias", vec![s.hidden], s.b1.as_ref());
                push("fc2.weight", vec![s.channels, s.hidden], s.w2.as_ref());
                push("fc2.bias", vec![s.channels], s.b2.as_ref());
            }
            LayerKind::Linear(l) => {
                push(
                    "weight",
                    vec![l.out_features, l.in_features],
                    l.weights.as_ref(),
                );
                if l.has_bias {
                    push("bias", vec![l.out_features], l.bias.as_ref());
                }
            }
            _ => {}
        }
    });
    if !missing.is_empty() {
        bail!(
            "cannot save weights: {} tensor(s) not populated, first `{}`",
            missing.len(),
            missing[0]
        );
    }
    Ok(out)
}

pub fn save_weights(path: &Path, net: &NetworkSpec) -> Result<()> {
    let tensors = collect_tensors(net)?;
    let header = WeightHeader {
        entries: tensors
            .iter()
            .map(|(name, shape, _)| WeightEntry {
                name: name.clone(),
                shape: shape.clone(),
                dtype: "f32".into(),
            })
            .collect(),
    };
    let mut bytes = serde_json::to_vec(&header)?;
    bytes.push(b'\n');
    for (_, _, data) in &tensors {
        for v in data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = fs::File::create(path)
        .with_context(|| format!("creating weight file {}", path.display()))?;
    file.write_all(&bytes)?;
    Ok(())
}

/// Parse a weight file: header entries plus per-entry payload slices.
fn read_weight_file(bytes: &[u8]) -> Result<(WeightHeader, Vec<Vec<f32>>)> {
    let newline = bytes
        .iter()
        .position(|b| *b == b'\n')
        .context("weight file has no header line")?;
    let header: WeightHeader =
        serde_json::from_slice(&bytes[..newline]).context("parsing weight header")?;
    let mut seen = HashSet::new();
    for e in &header.entries {
        if e.dtype != "f32" {
            bail!("entry `{}` has unsupported dtype `{}`", e.name, e.dtype);
        }
        if !seen.insert(e.name.clone()) {
            bail!("duplicate weight entry `{}`", e.name);
        }
    }
    let mut payload = &bytes[newline + 1..];
    let mut tensors = Vec::with_capacity(header.entries.len());
    for e in &header.entries {
        let count: usize = e.shape.iter().product();
        let bytes_needed = count * 4;
        if payload.len() < bytes_needed {
            bail!(
                "weight file truncated: entry `{}` needs {} bytes, {} left",
                e.name,
                bytes_needed,
                payload.len()
            );
        }
        let (head, rest) = payload.split_at(bytes_needed);
        tensors.push(
            head.chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        );
        payload = rest;
    }
    Ok((header, tensors))
}

/// Install weights from `path` into `net`.
///
/// Entries must match the spec's layer names and shapes. Tensors the file
/// does not provide are seeded from `fallback_seed` with a warning; the
/// returned list holds one message per defaulted tensor.
pub fn load_weights(path: &Path, net: &mut NetworkSpec, fallback_seed: u64) -> Result<Vec<String>> {
    let bytes =
        fs::read(path).with_context(|| format!("reading weight file {}", path.display()))?;
    let (header, tensors) = read_weight_file(&bytes)?;

    // Expected names and shapes come from the spec itself.
    coconv_core::network::seed_weights(net, fallback_seed);
    let expected = collect_tensors(net)?;
    let mut provided: std::collections::HashMap<String, (Vec<usize>, Vec<f32>)> = header
        .entries
        .iter()
        .zip(tensors)
        .map(|(e, data)| (e.name.clone(), (e.shape.clone(), data)))
        .collect();

    let mut warnings = Vec::new();
    let mut resolved: std::collections::HashMap<String, Vec<f32>> = Default::default();
    for (name, shape, seeded) in &expected {
        match provided.remove(name) {
            Some((file_shape, data)) => {
                if &file_shape != shape {
                    bail!(
                        "entry `{name}`: file shape {file_shape:?} conflicts with spec shape {shape:?}"
                    );
                }
                resolved.insert(name.clone(), data);
            }
            None => {
                warnings.push(format!(
                    "weight `{name}` missing from file; using seeded uniform initialization"
                ));
                resolved.insert(name.clone(), seeded.clone());
            }
        }
    }
    if let Some(stray) = provided.keys().next() {
        bail!("weight file entry `{stray}` does not match any layer in the spec");
    }

    install(net, &resolved);
    Ok(warnings)
}

fn install(net: &mut NetworkSpec, resolved: &std::collections::HashMap<String, Vec<f32>>) {
    net.for_each_layer_mut(&mut |layer| {
        let get = |suffix: &str| resolved.get(&format!("{}.{suffix}", layer.name)).cloned();
        match &mut layer.kind {
            LayerKind::Conv3d(c) => {
                if let Some(w) = get("weight") {
                    c.weights = Some(w);
                }
                if c.has_bias {
                    if let Some(b) = get("bias") {
                        c.bias = Some(b);
                    }
                }
            }
            LayerKind::Norm(n) => {
                if let Some(v) = get("scale") {
                    n.scale = v;
                }
                if let Some(v) = get("shift") {
                    n.shift = v;
                }
                if let Some(v) = get("mean") {
                    n.mean = v;
                }
                if let Some(v) = get("var") {
                    n.var = v;
                }
            }
            LayerKind::Se(s) => {
                if let Some(v) = get("fc1.weight") {
                    s.w1 = Some(v);
                }
                if let Some(v) = get("fc1.bias") {
                    s.b1 = Some(v);
                }
                if let Some(v) = get("fc2.weight") {
                    s.w2 = Some(v);
                }
                if let Some(v) = get("fc2.bias") {
                    s.b2 = Some(v);
                }
            }
            LayerKind::Linear(l) => {
                if let Some(w) = get("weight") {
                    l.weights = Some(w);
                }
                if l.has_bias {
                    if let Some(b) = get("bias") {
                        l.bias = Some(b);
                    }
                }
            }
            _ => {}
        }
    });
}
