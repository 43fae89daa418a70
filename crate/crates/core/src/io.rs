//! Columnar text files, run manifests and binary checkpoints.
//!
//! Floats are written with `{:e}`, which is the shortest representation that
//! parses back to the same bits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::flow::{FlowState, MonitorRecord};
use crate::profile::{Profile, Topology};
use crate::spectral::{SpectralResult, SymTensorU2};

const CHECKPOINT_MAGIC: &[u8; 8] = b"U2FLOWCK";
const CHECKPOINT_VERSION: u32 = 1;

fn join(values: impl IntoIterator<Item = f64>) -> String {
    let mut line = String::new();
    for (k, v) in values.into_iter().enumerate() {
        if k > 0 {
            line.push(' ');
        }
        write!(line, "{v:e}").unwrap();
    }
    line
}

/// Header lines (`# key value`) and numeric rows of a columnar file.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_table(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path)?;
    let mut t = Table { header: Vec::new(), rows: Vec::new() };
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(h) = line.strip_prefix('#') {
            t.header.push(h.trim().to_string());
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|w| w.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), k + 1)))?;
        t.rows.push(row);
    }
    Ok(t)
}

impl Table {
    fn value(&self, key: &str) -> Option<&str> {
        self.header.iter().find_map(|h| h.strip_prefix(key).and_then(|r| r.strip_prefix(' ')).map(str::trim))
    }

    fn columns(&self, width: usize) -> Result<Vec<Vec<f64>>> {
        let mut cols = vec![Vec::with_capacity(self.rows.len()); width];
        for row in &self.rows {
            if row.len() != width {
                return Err(Error::Format(format!("expected {width} columns, got {}", row.len())));
            }
            for (c, v) in cols.iter_mut().zip(row) {
                c.push(*v);
            }
        }
        Ok(cols)
    }
}

/// Writes `r s a b c` with the topology in the header.
pub fn write_profile(path: &Path, p: &Profile) -> Result<()> {
    let mut out = format!("# topology {}\n# columns r s a b c\n", p.topology.name());
    for i in 0..p.len() {
        out.push_str(&join([p.r[i], p.s[i], p.a[i], p.b[i], p.c[i]]));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_profile(path: &Path) -> Result<Profile> {
    let t = read_table(path)?;
    let topology = Topology::parse(
        t.value("topology")
            .ok_or_else(|| Error::Format(format!("{}: missing topology", path.display())))?,
    )?;
    let mut cols = t.columns(5)?.into_iter();
    let mut next = || cols.next().unwrap();
    let (r, s, a, b, c) = (next(), next(), next(), next(), next());
    Profile::with_arclength(topology, r, s, a, b, c)
}

/// Writes one row per record in [`MonitorRecord::COLUMNS`] order, with the
/// tracer values as trailing columns.
pub fn write_series(path: &Path, history: &[MonitorRecord]) -> Result<()> {
    fs::write(path, series_text(history))?;
    Ok(())
}

pub fn series_text(history: &[MonitorRecord]) -> String {
    let tracers = history.first().map_or(0, |r| r.tracers.len());
    let mut out = String::from("# columns");
    for c in &MonitorRecord::COLUMNS[..19] {
        write!(out, " {c}").unwrap();
    }
    for k in 0..tracers {
        write!(out, " tracer{k}").unwrap();
    }
    out.push('\n');
    for r in history {
        out.push_str(&join(r.scalars().into_iter().chain(r.tracers.iter().copied())));
        out.push('\n');
    }
    out
}

pub fn read_series(path: &Path) -> Result<Vec<MonitorRecord>> {
    let t = read_table(path)?;
    t.rows
        .iter()
        .map(|row| {
            if row.len() < 19 {
                return Err(Error::Format(format!("series row has {} columns", row.len())));
            }
            MonitorRecord::from_scalars(&row[..19], row[19..].to_vec())
        })
        .collect()
}

/// Writes `index eigenvalue residual` with `K` and `λ*` in the header.
pub fn write_spectrum(path: &Path, res: &SpectralResult) -> Result<()> {
    let mut out = format!(
        "# k {}\n# lambda_star {:e}\n# cells {}\n# s_max {:e}\n# columns index eigenvalue residual\n",
        res.k, res.lambda_star, res.grid.cells, res.grid.s_max
    );
    for (i, (l, r)) in res.eigenvalues.iter().zip(&res.residuals).enumerate() {
        writeln!(out, "{i} {l:e} {r:e}").unwrap();
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes `s h00 h11 h33 h03`.
pub fn write_tensor(path: &Path, h: &SymTensorU2) -> Result<()> {
    let mut out = String::from("# columns s h00 h11 h33 h03\n");
    for i in 0..h.len() {
        out.push_str(&join([h.s[i], h.h00[i], h.h11[i], h.h33[i], h.h03[i]]));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<SymTensorU2> {
    let t = read_table(path)?;
    let mut cols = t.columns(5)?.into_iter();
    let mut next = || cols.next().unwrap();
    Ok(SymTensorU2 { s: next(), h00: next(), h11: next(), h33: next(), h03: next() })
}

/// Everything needed to rerun a command, plus its outcome.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub wall_clock_s: f64,
    pub grid: BTreeMap<String, toml::Value>,
    pub summary: BTreeMap<String, toml::Value>,
    pub config: RunConfig,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            wall_clock_s: 0.0,
            grid: BTreeMap::new(),
            summary: BTreeMap::new(),
            config: config.clone(),
        }
    }

    pub fn grid(&mut self, key: &str, v: impl Into<toml::Value>) {
        self.grid.insert(key.into(), v.into());
    }

    pub fn summary(&mut self, key: &str, v: impl Into<toml::Value>) {
        self.summary.insert(key.into(), v.into());
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(path, text)?;
        Ok(())
    }
}

/// Reads the `config` table of a manifest back into a configuration.
pub fn manifest_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    let table: toml::Table = text.parse().map_err(|e| Error::Format(format!("{e}")))?;
    let cfg = table
        .get("config")
        .ok_or_else(|| Error::Format(format!("{}: no config table", path.display())))?;
    RunConfig::load(Some(&toml::to_string(cfg).map_err(|e| Error::Format(e.to_string()))?), &[])
}

struct Encoder(Vec<u8>);

impl Encoder {
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.u64(v.to_bits());
    }

    fn vec(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for x in v {
            self.f64(*x);
        }
    }
}

struct Decoder<'a>(&'a [u8]);

impl Decoder<'_> {
    fn u64(&mut self) -> Result<u64> {
        if self.0.len() < 8 {
            return Err(Error::Format("truncated checkpoint".into()));
        }
        let (head, rest) = self.0.split_at(8);
        self.0 = rest;
        Ok(u64::from_le_bytes(head.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn vec(&mut self) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        if n > self.0.len() / 8 {
            return Err(Error::Format("truncated checkpoint".into()));
        }
        (0..n).map(|_| self.f64()).collect()
    }
}

/// Serializes the full flow state bit-exactly.
pub fn encode_checkpoint(state: &FlowState) -> Vec<u8> {
    let mut e = Encoder(Vec::new());
    e.0.extend_from_slice(CHECKPOINT_MAGIC);
    e.0.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    let p = &state.profile;
    e.u64(matches!(p.topology, Topology::Bolt) as u64);
    for v in [&p.r, &p.s, &p.a, &p.b, &p.c] {
        e.vec(v);
    }
    e.f64(state.t);
    e.f64(state.dt);
    e.u64(state.t_hat.is_some() as u64);
    e.f64(state.t_hat.unwrap_or(0.0));
    e.u64(state.steps);
    e.u64(state.regrids as u64);
    e.f64(state.rm0);
    e.u64(state.history.len() as u64);
    for r in &state.history {
        e.vec(&r.scalars());
        e.vec(&r.tracers);
    }
    e.0
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<FlowState> {
    if bytes.len() < 12 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(Error::Format("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("checkpoint version {version}, expected {CHECKPOINT_VERSION}")));
    }
    let mut d = Decoder(&bytes[12..]);
    let topology = if d.u64()? == 1 { Topology::Bolt } else { Topology::Nut };
    let (r, s, a, b, c) = (d.vec()?, d.vec()?, d.vec()?, d.vec()?, d.vec()?);
    let profile = Profile::with_arclength(topology, r, s, a, b, c)?;
    let t = d.f64()?;
    let dt = d.f64()?;
    let has_t_hat = d.u64()? == 1;
    let t_hat = d.f64()?;
    let steps = d.u64()?;
    let regrids = d.u64()? as u32;
    let rm0 = d.f64()?;
    let n = d.u64()? as usize;
    let mut history = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        let sc = d.vec()?;
        let tr = d.vec()?;
        history.push(MonitorRecord::from_scalars(&sc, tr)?);
    }
    if !d.0.is_empty() {
        return Err(Error::Format("trailing bytes in checkpoint".into()));
    }
    if history.is_empty() {
        return Err(Error::Format("checkpoint without history".into()));
    }
    Ok(FlowState { profile, t, dt, t_hat: has_t_hat.then_some(t_hat), steps, regrids, rm0, history })
}

pub fn write_checkpoint(path: &Path, state: &FlowState) -> Result<()> {
    fs::write(path, encode_checkpoint(state))?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<FlowState> {
    decode_checkpoint(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{run, FlowConfig};
    use crate::reference::TaubNut;

    fn small_state() -> (FlowState, FlowConfig) {
        let p = TaubNut::new(1.0).unwrap().profile(120, 20.0).unwrap();
        let cfg = FlowConfig { t_end: 0.05, record_every: 5, ..FlowConfig::default() };
        let mut st = FlowState::new(p, &cfg).unwrap();
        run(&mut st, &cfg).unwrap();
        (st, cfg)
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let (st, _) = small_state();
        let bytes = encode_checkpoint(&st);
        let back = decode_checkpoint(&bytes).unwrap();
        assert_eq!(encode_checkpoint(&back), bytes);
        assert_eq!(back.profile, st.profile);
    }

    #[test]
    fn corrupt_checkpoints_are_rejected() {
        let (st, _) = small_state();
        let mut bytes = encode_checkpoint(&st);
        assert!(decode_checkpoint(&bytes[..bytes.len() - 3]).is_err());
        bytes[0] = b'X';
        assert!(decode_checkpoint(&bytes).is_err());
    }

    #[test]
    fn text_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (st, _) = small_state();
        let pp = dir.path().join("p.txt");
        write_profile(&pp, &st.profile).unwrap();
        assert_eq!(read_profile(&pp).unwrap(), st.profile);
        let sp = dir.path().join("s.txt");
        write_series(&sp, &st.history).unwrap();
        assert_eq!(series_text(&read_series(&sp).unwrap()), series_text(&st.history));
        let h = SymTensorU2 {
            s: vec![0.5, 1.5],
            h00: vec![0.1, 1e-300],
            h11: vec![-2.0, 3.0],
            h33: vec![f64::MIN_POSITIVE, 4.0],
            h03: vec![0.0, -0.0],
        };
        let tp = dir.path().join("h.txt");
        write_tensor(&tp, &h).unwrap();
        assert_eq!(read_tensor(&tp).unwrap(), h);
    }

    #[test]
    fn manifest_reproduces_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig::load(None, &["kappa=0.2".into(), "p=[0.01]".into()]).unwrap();
        let mut m = RunManifest::new("simulate", &cfg);
        m.summary("mass", 0.25);
        m.grid("nodes", 100);
        let path = dir.path().join("manifest.toml");
        m.write(&path).unwrap();
        assert_eq!(manifest_config(&path).unwrap(), cfg);
    }

    proptest::proptest! {
        #[test]
        fn tensor_text_round_trip_is_bit_exact(v in proptest::collection::vec(proptest::num::f64::ANY, 1..40)) {
            let dir = tempfile::tempdir().unwrap();
            let h = SymTensorU2 { s: v.clone(), h00: v.clone(), h11: v.iter().map(|x| -x).collect(), h33: v.clone(), h03: v.clone() };
            let path = dir.path().join("h.txt");
            write_tensor(&path, &h).unwrap();
            let back = read_tensor(&path).unwrap();
            for (a, b) in back.h11.iter().zip(&h.h11) {
                proptest::prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
            }
        }
    }
}
