//! Field dump format: a diff-able text header followed by a little-endian
//! f64 payload, node-major x then y then layer, 3 components per node.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use sha2::{Digest, Sha256};

use nemslab_core::domain::{extrude, make_domain, DomainKind};
use nemslab_core::field::DirectorField;
use nemslab_core::params::ScalingParams;

pub const MAGIC: &str = "NEMSLAB-FIELD v1";

pub fn write_dump(path: &Path, field: &DirectorField, p: &ScalingParams) -> Result<()> {
    let dom = &field.grid.domain;
    let mut header = String::new();
    header.push_str(MAGIC);
    header.push('\n');
    match dom.kind {
        DomainKind::Disk { radius } => {
            header.push_str("kind=disk\n");
            header.push_str(&format!("radius={radius}\n"));
        }
        DomainKind::Rectangle { width, height } => {
            header.push_str("kind=rectangle\n");
            header.push_str(&format!("width={width}\nheight={height}\n"));
        }
        DomainKind::Annulus { r_in, r_out } => {
            header.push_str("kind=annulus\n");
            header.push_str(&format!("r_in={r_in}\nr_out={r_out}\n"));
        }
    }
    header.push_str(&format!("nx={}\nny={}\nn_layers={}\n", dom.nx, dom.ny, field.grid.n_layers));
    header.push_str(&format!("hx={}\nhy={}\nhz={}\n", dom.hx, dom.hy, field.grid.hz));
    header.push_str(&format!("eps={}\neta={}\n", p.eps(), p.eta()));
    header.push_str(&format!(
        "payload=f64le nodes={} comps=3 order=xyz\n",
        field.values().len()
    ));
    header.push_str("END\n");

    let mut file = std::fs::File::create(path)
        .with_context(|| format!("cannot create dump {}", path.display()))?;
    file.write_all(header.as_bytes())?;
    let mut buf = Vec::with_capacity(field.values().len() * 24);
    for v in field.values() {
        for c in v {
            buf.extend_from_slice(&c.to_le_bytes());
        }
    }
    file.write_all(&buf)?;
    Ok(())
}

pub struct LoadedDump {
    pub field: DirectorField,
    pub params: ScalingParams,
    /// Truncated SHA-256 of the dump bytes, for CSV provenance headers.
    pub hash: String,
}

pub fn read_dump(path: &Path) -> Result<LoadedDump> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read dump {}", path.display()))?;
    let hash = {
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        hasher.finalize().iter().take(6).map(|b| format!("{b:02x}")).collect::<String>()
    };
    let head_end = find_header_end(&bytes)
        .ok_or_else(|| anyhow!("corrupt dump: no END marker in the first {} bytes", bytes.len().min(4096)))?;
    let header = std::str::from_utf8(&bytes[..head_end])
        .map_err(|e| anyhow!("corrupt dump header: {e}"))?;
    let mut lines = header.lines();
    let magic = lines.next().unwrap_or_default();
    if magic != MAGIC {
        bail!("not a field dump: expected {MAGIC:?}, found {magic:?}");
    }
    let mut kv = std::collections::BTreeMap::new();
    for line in lines {
        if line == "END" {
            break;
        }
        if let Some((k, v)) = line.split_once('=') {
            kv.insert(k.to_string(), v.to_string());
        }
    }
    let getf = |k: &str| -> Result<f64> {
        kv.get(k)
            .ok_or_else(|| anyhow!("corrupt dump: missing header key {k}"))?
            .parse()
            .map_err(|e| anyhow!("corrupt dump: bad {k}: {e}"))
    };
    let getu = |k: &str| -> Result<usize> {
        kv.get(k)
            .ok_or_else(|| anyhow!("corrupt dump: missing header key {k}"))?
            .parse()
            .map_err(|e| anyhow!("corrupt dump: bad {k}: {e}"))
    };

    let kind = match kv.get("kind").map(String::as_str) {
        Some("disk") => DomainKind::Disk { radius: getf("radius")? },
        Some("rectangle") => DomainKind::Rectangle { width: getf("width")?, height: getf("height")? },
        Some("annulus") => DomainKind::Annulus { r_in: getf("r_in")?, r_out: getf("r_out")? },
        other => bail!("corrupt dump: unknown kind {other:?}"),
    };
    let (nx, ny, n_layers) = (getu("nx")?, getu("ny")?, getu("n_layers")?);
    let params = ScalingParams::new(getf("eps")?, getf("eta")?)?;

    let domain = make_domain(kind, nx, ny)?;
    let grid = Arc::new(extrude(&domain, n_layers)?);
    let count = nx * ny * n_layers;
    let expected = count * 24;
    let got = bytes.len() - head_end;
    if got != expected {
        bail!(
            "truncated dump: expected {expected} payload bytes at offset {head_end}, found {got}"
        );
    }
    let mut field = DirectorField::constant(&grid, [0.0; 3]);
    let payload = &bytes[head_end..];
    for (i, v) in field.values_mut().iter_mut().enumerate() {
        for c in 0..3 {
            let at = (i * 3 + c) * 8;
            let mut raw = [0u8; 8];
            raw.copy_from_slice(&payload[at..at + 8]);
            v[c] = f64::from_le_bytes(raw);
        }
    }
    Ok(LoadedDump { field, params, hash })
}

fn find_header_end(bytes: &[u8]) -> Option<usize> {
    let probe = &bytes[..bytes.len().min(4096)];
    let needle = b"\nEND\n";
    probe.windows(needle.len()).position(|w| w == needle).map(|i| i + needle.len())
}

