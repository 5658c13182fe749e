//! Capped parallel execution of an external solver binary.
//!
//! A runner specification names an argument-vector template plus the
//! concrete strings substituted for `{config}` and `{instance}`. A group
//! evaluation launches one process per participant, polls them, and
//! kills the stragglers the moment the first one succeeds — the same
//! early-stopping cost model the matrix oracle replays, except measured
//! on the wall clock. Single evaluations run one process to completion
//! or to the timeout and charge the full duration.
//!
//! Wall-clock measurement means runtimes are approximate (poll
//! granularity, scheduler noise); what is exact is the accounting rule:
//! every participant is charged `min(first finisher, timeout)`.

use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::domain::{ConfigId, InstanceId};
use crate::error::{Error, Result};
use crate::oracle::{GroupOutcome, Oracle};

fn default_true() -> bool {
    true
}

/// How to invoke the solver and what to substitute.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExternalRunnerSpec {
    /// Argument vector; `{config}` and `{instance}` must each appear
    /// exactly once across all arguments.
    pub command: Vec<String>,
    /// Substitution value per configuration id.
    pub configs: Vec<String>,
    /// Substitution value per instance id.
    pub instances: Vec<String>,
    /// Cap in seconds.
    pub timeout: f64,
    /// Treat a non-zero exit as a run that never finishes (a timeout)
    /// rather than as an error. Solvers that signal "unsolved" through
    /// the exit code need this on, which is the default.
    #[serde(default = "default_true")]
    pub nonzero_exit_as_timeout: bool,
}

impl ExternalRunnerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.command.is_empty() {
            return Err(Error::InvalidParameter(
                "the command template is empty".to_string(),
            ));
        }
        for (placeholder, name) in [("{config}", "config"), ("{instance}", "instance")] {
            let count: usize = self
                .command
                .iter()
                .map(|arg| arg.matches(placeholder).count())
                .sum();
            if count != 1 {
                return Err(Error::InvalidParameter(format!(
                    "the command template must contain the {name} placeholder \
                     {placeholder} exactly once, found {count}"
                )));
            }
        }
        if self.configs.is_empty() || self.instances.is_empty() {
            return Err(Error::InvalidParameter(
                "the runner needs at least one configuration and one instance".to_string(),
            ));
        }
        if !(self.timeout > 0.0 && self.timeout.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "timeout must be a positive finite number, got {}",
                self.timeout
            )));
        }
        Ok(())
    }

    fn argv(&self, config: &str, instance: &str) -> Vec<String> {
        self.command
            .iter()
            .map(|arg| arg.replace("{config}", config).replace("{instance}", instance))
            .collect()
    }

    fn spawn(&self, config: &str, instance: &str) -> Result<Child> {
        let argv = self.argv(config, instance);
        Command::new(&argv[0])
            .args(&argv[1..])
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| Error::SpawnFailure(format!("{}: {e}", argv[0])))
    }

    fn check_config(&self, config: ConfigId) -> Result<&str> {
        self.configs
            .get(config.0)
            .map(String::as_str)
            .ok_or_else(|| {
                Error::IndexOutOfRange(format!(
                    "configuration {} of {}",
                    config.0,
                    self.configs.len()
                ))
            })
    }

    fn check_instance(&self, instance: InstanceId) -> Result<&str> {
        self.instances
            .get(instance.0)
            .map(String::as_str)
            .ok_or_else(|| {
                Error::IndexOutOfRange(format!(
                    "instance {} of {}",
                    instance.0,
                    self.instances.len()
                ))
            })
    }
}

const POLL_INTERVAL: Duration = Duration::from_millis(2);

fn kill_all(children: &mut [Option<Child>]) {
    for slot in children.iter_mut() {
        if let Some(child) = slot {
            let _ = child.kill();
            let _ = child.wait();
        }
        *slot = None;
    }
}

/// Race `group` on one instance: first successful exit below the timeout
/// wins, everyone else is killed, and every participant is charged the
/// winner's wall time (or the timeout when nobody finishes).
pub fn run_external(
    spec: &ExternalRunnerSpec,
    group: &[ConfigId],
    instance: InstanceId,
) -> Result<GroupOutcome> {
    let instance_value = spec.check_instance(instance)?;
    let mut children: Vec<Option<Child>> = Vec::with_capacity(group.len());
    let start = Instant::now();
    for &config in group {
        let config_value = match spec.check_config(config) {
            Ok(v) => v,
            Err(e) => {
                kill_all(&mut children);
                return Err(e);
            }
        };
        match spec.spawn(config_value, instance_value) {
            Ok(child) => children.push(Some(child)),
            Err(e) => {
                kill_all(&mut children);
                return Err(e);
            }
        }
    }

    let mut winner: Option<(ConfigId, f64)> = None;
    'poll: loop {
        for (idx, slot) in children.iter_mut().enumerate() {
            let Some(child) = slot else { continue };
            match child.try_wait() {
                Ok(Some(status)) => {
                    let elapsed = start.elapsed().as_secs_f64();
                    if status.success() && elapsed < spec.timeout {
                        winner = Some((group[idx], elapsed));
                        break 'poll;
                    }
                    if !status.success() && !spec.nonzero_exit_as_timeout {
                        let argv = spec.argv(spec.check_config(group[idx])?, instance_value);
                        kill_all(&mut children);
                        return Err(Error::NonZeroExit(format!(
                            "{} exited with {status}",
                            argv.join(" ")
                        )));
                    }
                    // Finished too late or signalled "unsolved": treated
                    // as a run that never completes.
                    *slot = None;
                }
                Ok(None) => {}
                Err(e) => {
                    kill_all(&mut children);
                    return Err(Error::Io(e));
                }
            }
        }
        if children.iter().all(Option::is_none) {
            break;
        }
        if start.elapsed().as_secs_f64() >= spec.timeout {
            break;
        }
        thread::sleep(POLL_INTERVAL);
    }
    kill_all(&mut children);

    let mut participants = group.to_vec();
    participants.sort_unstable();
    let charge_unit = winner.map_or(spec.timeout, |(_, t)| t);
    Ok(GroupOutcome {
        instance,
        participants,
        winner: winner.map(|(c, _)| c),
        winner_runtime: winner.map(|(_, t)| t),
        cpu_charge: group.len() as f64 * charge_unit,
    })
}

/// Run one configuration to completion or to the timeout, charging the
/// full wall time.
pub fn run_external_single(
    spec: &ExternalRunnerSpec,
    config: ConfigId,
    instance: InstanceId,
) -> Result<(f64, bool)> {
    let config_value = spec.check_config(config)?;
    let instance_value = spec.check_instance(instance)?;
    let start = Instant::now();
    let mut child = spec.spawn(config_value, instance_value)?;
    loop {
        match child.try_wait() {
            Ok(Some(status)) => {
                let elapsed = start.elapsed().as_secs_f64();
                if status.success() && elapsed < spec.timeout {
                    return Ok((elapsed, true));
                }
                if !status.success() && !spec.nonzero_exit_as_timeout {
                    return Err(Error::NonZeroExit(format!(
                        "{} exited with {status}",
                        spec.argv(config_value, instance_value).join(" ")
                    )));
                }
                return Ok((spec.timeout, false));
            }
            Ok(None) => {}
            Err(e) => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(Error::Io(e));
            }
        }
        if start.elapsed().as_secs_f64() >= spec.timeout {
            let _ = child.kill();
            let _ = child.wait();
            return Ok((spec.timeout, false));
        }
        thread::sleep(POLL_INTERVAL);
    }
}

/// Oracle session over an external runner, with the same instance
/// bookkeeping as the matrix session.
pub struct ExternalOracle {
    spec: ExternalRunnerSpec,
    consumed: Vec<bool>,
    cpu_total: f64,
}

impl ExternalOracle {
    pub fn new(spec: ExternalRunnerSpec) -> Result<Self> {
        spec.validate()?;
        let consumed = vec![false; spec.instances.len()];
        Ok(ExternalOracle {
            spec,
            consumed,
            cpu_total: 0.0,
        })
    }
}

impl Oracle for ExternalOracle {
    fn n_configs(&self) -> usize {
        self.spec.configs.len()
    }

    fn n_instances(&self) -> usize {
        self.spec.instances.len()
    }

    fn timeout(&self) -> f64 {
        self.spec.timeout
    }

    fn evaluate_group(
        &mut self,
        group: &[ConfigId],
        instance: InstanceId,
    ) -> Result<GroupOutcome> {
        if group.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "group evaluations need at least 2 participants, got {}",
                group.len()
            )));
        }
        if instance.0 >= self.consumed.len() {
            return Err(Error::IndexOutOfRange(format!(
                "instance {} of {}",
                instance.0,
                self.consumed.len()
            )));
        }
        if self.consumed[instance.0] {
            return Err(Error::InstanceReuse(instance));
        }
        let outcome = run_external(&self.spec, group, instance)?;
        self.consumed[instance.0] = true;
        self.cpu_total += outcome.cpu_charge;
        Ok(outcome)
    }

    fn evaluate_single(&mut self, config: ConfigId, instance: InstanceId) -> Result<(f64, bool)> {
        let (runtime, finished) = run_external_single(&self.spec, config, instance)?;
        self.cpu_total += runtime;
        Ok((runtime, finished))
    }

    fn cpu_total(&self) -> f64 {
        self.cpu_total
    }
}
