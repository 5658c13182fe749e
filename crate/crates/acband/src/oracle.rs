//! Runtime oracle with a capping cost model.
//!
//! A group evaluation launches every member on the same instance and stops
//! the moment the fastest member finishes, so the CPU charge is
//! `|group| * min(fastest runtime, timeout)`. Matrix-backed oracles replay
//! pre-recorded runtimes; `runner` provides the process-backed equivalent.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{rank_with_ties, ConfigId, InstanceId, SeededRng};
use crate::error::{Error, Result};

/// Magic bytes opening the binary matrix format.
pub const BINARY_MAGIC: &[u8; 5] = b"ACBM1";

/// Dense runtime table: `n_configs` rows by `n_instances` columns of
/// positive runtimes, each at most `timeout`.
#[derive(Debug, Clone)]
pub struct RuntimeMatrix {
    n_configs: usize,
    n_instances: usize,
    timeout: f64,
    values: Vec<f64>,
    clamped: usize,
}

impl RuntimeMatrix {
    /// Build a matrix from row-major values, clamping overshoots.
    ///
    /// Values above `timeout` are clamped down to it and counted in
    /// `clamped()`; non-positive or non-finite values are rejected.
    pub fn from_values(
        n_configs: usize,
        n_instances: usize,
        timeout: f64,
        mut values: Vec<f64>,
    ) -> Result<Self> {
        if n_configs == 0 || n_instances == 0 {
            return Err(Error::DimensionMismatch(
                "matrix must have at least one row and one column".into(),
            ));
        }
        if !(timeout > 0.0 && timeout.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "timeout must be a positive finite number, got {timeout}"
            )));
        }
        if values.len() != n_configs * n_instances {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values for a {}x{} matrix, got {}",
                n_configs * n_instances,
                n_configs,
                n_instances,
                values.len()
            )));
        }
        let mut clamped = 0;
        for (idx, v) in values.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(Error::MalformedFile(format!(
                    "non-finite runtime at flat index {idx}"
                )));
            }
            if *v <= 0.0 {
                return Err(Error::NonPositiveRuntime {
                    row: idx / n_instances,
                    col: idx % n_instances,
                    value: *v,
                });
            }
            if *v > timeout {
                *v = timeout;
                clamped += 1;
            }
        }
        Ok(RuntimeMatrix {
            n_configs,
            n_instances,
            timeout,
            values,
            clamped,
        })
    }

    pub fn n_configs(&self) -> usize {
        self.n_configs
    }

    pub fn n_instances(&self) -> usize {
        self.n_instances
    }

    pub fn timeout(&self) -> f64 {
        self.timeout
    }

    /// Number of values clamped down to the timeout at construction.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    /// Runtime of `config` on `instance`.
    pub fn runtime(&self, config: ConfigId, instance: InstanceId) -> Result<f64> {
        if config.0 >= self.n_configs {
            return Err(Error::IndexOutOfRange(format!(
                "configuration {} of {}",
                config.0, self.n_configs
            )));
        }
        if instance.0 >= self.n_instances {
            return Err(Error::IndexOutOfRange(format!(
                "instance {} of {}",
                instance.0, self.n_instances
            )));
        }
        Ok(self.values[config.0 * self.n_instances + instance.0])
    }

    /// Full runtime row of one configuration.
    pub fn row(&self, config: ConfigId) -> Result<&[f64]> {
        if config.0 >= self.n_configs {
            return Err(Error::IndexOutOfRange(format!(
                "configuration {} of {}",
                config.0, self.n_configs
            )));
        }
        let start = config.0 * self.n_instances;
        Ok(&self.values[start..start + self.n_instances])
    }

    /// Parse the text format: a `#configs=<n>,instances=<m>,timeout=<sec>`
    /// header line followed by `n` rows of `m` comma-separated runtimes.
    pub fn load_csv(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::MalformedFile("empty matrix file".into()))??;
        let (n_configs, n_instances, timeout) = parse_csv_header(header.trim())?;
        let mut values = Vec::with_capacity(n_configs * n_instances);
        let mut rows = 0usize;
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = 0usize;
            for field in line.split(',') {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::MalformedFile(format!(
                        "row {rows}: cannot parse runtime {field:?}"
                    ))
                })?;
                values.push(v);
                cols += 1;
            }
            if cols != n_instances {
                return Err(Error::MalformedFile(format!(
                    "row {rows} has {cols} columns, header declares {n_instances}"
                )));
            }
            rows += 1;
        }
        if rows != n_configs {
            return Err(Error::DimensionMismatch(format!(
                "header declares {n_configs} rows, file has {rows}"
            )));
        }
        RuntimeMatrix::from_values(n_configs, n_instances, timeout, values)
    }

    /// Write the text format described under `load_csv`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path)?;
        let mut out = BufWriter::new(file);
        writeln!(
            out,
            "#configs={},instances={},timeout={}",
            self.n_configs, self.n_instances, self.timeout
        )?;
        for row in 0..self.n_configs {
            let start = row * self.n_instances;
            let mut line = String::new();
            for col in 0..self.n_instances {
                if col > 0 {
                    line.push(',');
                }
                line.push_str(&self.values[start + col].to_string());
            }
            writeln!(out, "{line}")?;
        }
        out.flush()?;
        Ok(())
    }

    /// Parse the binary format: magic `ACBM1`, three little-endian u64
    /// words (configs, instances, timeout in milliseconds), then the
    /// row-major matrix as little-endian f32.
    pub fn load_binary(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        let mut reader = BufReader::new(file);
        let mut magic = [0u8; 5];
        reader
            .read_exact(&mut magic)
            .map_err(|_| Error::MalformedFile("file shorter than magic".into()))?;
        if &magic != BINARY_MAGIC {
            return Err(Error::MalformedFile(format!(
                "bad magic {magic:?}, expected {BINARY_MAGIC:?}"
            )));
        }
        let mut word = [0u8; 8];
        let mut read_u64 = |reader: &mut BufReader<File>| -> Result<u64> {
            reader
                .read_exact(&mut word)
                .map_err(|_| Error::MalformedFile("truncated header".into()))?;
            Ok(u64::from_le_bytes(word))
        };
        let n_configs = read_u64(&mut reader)? as usize;
        let n_instances = read_u64(&mut reader)? as usize;
        let timeout_millis = read_u64(&mut reader)?;
        let timeout = timeout_millis as f64 / 1000.0;
        let count = n_configs
            .checked_mul(n_instances)
            .ok_or_else(|| Error::MalformedFile("matrix dimensions overflow".into()))?;
        let mut values = Vec::with_capacity(count);
        let mut buf = [0u8; 4];
        for _ in 0..count {
            reader
                .read_exact(&mut buf)
                .map_err(|_| Error::MalformedFile("truncated matrix body".into()))?;
            values.push(f64::from(f32::from_le_bytes(buf)));
        }
        RuntimeMatrix::from_values(n_configs, n_instances, timeout, values)
    }

    /// Write the binary format described under `load_binary`.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let file = File::create(path)?;
        let mut out = BufWriter::new(file);
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&(self.n_configs as u64).to_le_bytes())?;
        out.write_all(&(self.n_instances as u64).to_le_bytes())?;
        let timeout_millis = (self.timeout * 1000.0).round() as u64;
        out.write_all(&timeout_millis.to_le_bytes())?;
        for &v in &self.values {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }
}

fn parse_csv_header(header: &str) -> Result<(usize, usize, f64)> {
    let body = header.strip_prefix("#configs=").ok_or_else(|| {
        Error::MalformedFile(format!(
            "header must start with '#configs=', got {header:?}"
        ))
    })?;
    let mut parts = body.split(',');
    let n_configs: usize = parts
        .next()
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::MalformedFile("header: bad configs count".into()))?;
    let n_instances: usize = parts
        .next()
        .and_then(|s| s.trim().strip_prefix("instances="))
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::MalformedFile("header: bad instances count".into()))?;
    let timeout: f64 = parts
        .next()
        .and_then(|s| s.trim().strip_prefix("timeout="))
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::MalformedFile("header: bad timeout".into()))?;
    if parts.next().is_some() {
        return Err(Error::MalformedFile("header: trailing fields".into()));
    }
    Ok((n_configs, n_instances, timeout))
}

/// Result of one capped group evaluation on one instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupOutcome {
    pub instance: InstanceId,
    /// Members of the group, sorted by id.
    pub participants: Vec<ConfigId>,
    /// First member to finish strictly below the timeout, if any.
    pub winner: Option<ConfigId>,
    pub winner_runtime: Option<f64>,
    /// CPU seconds consumed: `|participants| * min(fastest, timeout)`.
    pub cpu_charge: f64,
}

/// CPU accounting for a run, totalled in evaluation order with per-epoch
/// and per-round breakdowns in execution order.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CpuLedger {
    pub total_seconds: f64,
    pub per_epoch: Vec<f64>,
    pub per_round: Vec<Vec<f64>>,
}

/// Source of group and single evaluations plus their CPU accounting.
///
/// Implementations track which instances a run has consumed so that the
/// disjointness required by the elimination schedule is enforced at the
/// evaluation boundary.
pub trait Oracle {
    fn n_configs(&self) -> usize;

    fn n_instances(&self) -> usize;

    fn timeout(&self) -> f64;

    /// Capped parallel run of `group` on a fresh instance.
    fn evaluate_group(&mut self, group: &[ConfigId], instance: InstanceId)
        -> Result<GroupOutcome>;

    /// Uncapped single run; the full runtime is charged. Returns the
    /// observed runtime and whether the run finished below the timeout.
    /// Unlike group evaluations, instances may be revisited freely.
    fn evaluate_single(&mut self, config: ConfigId, instance: InstanceId) -> Result<(f64, bool)>;

    /// Total CPU seconds charged so far, accumulated in evaluation order.
    fn cpu_total(&self) -> f64;
}

/// Oracle session replaying a runtime matrix.
///
/// The session owns the consumed-instance set and the running CPU total
/// for one run. Runtime ties are broken by a stream derived from
/// `(seed, instance)`, so each evaluation is a pure function of
/// `(matrix, group, instance, seed)`.
pub struct MatrixOracle<'a> {
    matrix: &'a RuntimeMatrix,
    consumed: Vec<bool>,
    cpu_total: f64,
    tie_seed: u64,
}

impl<'a> MatrixOracle<'a> {
    pub fn new(matrix: &'a RuntimeMatrix, seed: u64) -> Self {
        MatrixOracle {
            matrix,
            consumed: vec![false; matrix.n_instances()],
            cpu_total: 0.0,
            tie_seed: seed,
        }
    }

    pub fn matrix(&self) -> &RuntimeMatrix {
        self.matrix
    }
}

impl Oracle for MatrixOracle<'_> {
    fn n_configs(&self) -> usize {
        self.matrix.n_configs()
    }

    fn n_instances(&self) -> usize {
        self.matrix.n_instances()
    }

    fn timeout(&self) -> f64 {
        self.matrix.timeout()
    }

    fn evaluate_group(
        &mut self,
        group: &[ConfigId],
        instance: InstanceId,
    ) -> Result<GroupOutcome> {
        if group.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "group evaluation needs at least 2 members, got {}",
                group.len()
            )));
        }
        if instance.0 >= self.matrix.n_instances() {
            return Err(Error::IndexOutOfRange(format!(
                "instance {} of {}",
                instance.0,
                self.matrix.n_instances()
            )));
        }
        if self.consumed[instance.0] {
            return Err(Error::InstanceReuse(instance));
        }
        self.consumed[instance.0] = true;

        let timeout = self.matrix.timeout();
        let mut runtimes = Vec::with_capacity(group.len());
        for &c in group {
            runtimes.push((c, self.matrix.runtime(c, instance)?));
        }
        let fastest = runtimes
            .iter()
            .map(|&(_, rt)| rt)
            .fold(f64::INFINITY, f64::min);

        let winner = if fastest < timeout {
            let tied: Vec<(ConfigId, f64)> = runtimes
                .iter()
                .filter(|&&(_, rt)| rt == fastest)
                .map(|&(c, rt)| (c, -rt))
                .collect();
            if tied.len() == 1 {
                Some(tied[0].0)
            } else {
                let mut rng =
                    SeededRng::new(self.tie_seed).fork_with("tie", &[instance.0 as u64]);
                Some(rank_with_ties(&tied, &mut rng)[0])
            }
        } else {
            None
        };

        let mut participants: Vec<ConfigId> = group.to_vec();
        participants.sort_unstable();
        let cpu_charge = group.len() as f64 * fastest.min(timeout);
        self.cpu_total += cpu_charge;
        Ok(GroupOutcome {
            instance,
            participants,
            winner,
            winner_runtime: winner.map(|_| fastest),
            cpu_charge,
        })
    }

    fn evaluate_single(&mut self, config: ConfigId, instance: InstanceId) -> Result<(f64, bool)> {
        let rt = self.matrix.runtime(config, instance)?;
        self.cpu_total += rt;
        Ok((rt, rt < self.matrix.timeout()))
    }

    fn cpu_total(&self) -> f64 {
        self.cpu_total
    }
}
