//! Build plans with the canonical configure options, executed through a
//! [`CommandExecutor`] with dependency-ordered parallelism.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{CommandExecutor, CommandSpec, ExecError};
use crate::layout::{inspect_install, LayoutViolation};
use crate::manifest::{BuildSystem, PackageName};
use crate::registry::Registry;
use crate::resolver::{Outcome, Resolution, Solution};
use crate::template::{Placeholder, Template, TemplateError};
use crate::version::Version;

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid build config: {0}")]
    InvalidConfig(String),
    #[error("template error in {package} {field}: {error}")]
    Template {
        package: String,
        field: &'static str,
        error: TemplateError,
    },
    #[error(transparent)]
    Launch(#[from] ExecError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildConfig {
    pub prefix: PathBuf,
    pub debug: bool,
    pub shared_libs: bool,
    pub use_64bit: bool,
    pub parallelism: usize,
}

impl BuildConfig {
    pub fn new(prefix: impl Into<PathBuf>) -> Self {
        BuildConfig {
            prefix: prefix.into(),
            debug: false,
            shared_libs: false,
            use_64bit: false,
            parallelism: 1,
        }
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        if !self.prefix.is_absolute() {
            return Err(OrchestratorError::InvalidConfig(format!(
                "prefix {} is not absolute",
                self.prefix.display()
            )));
        }
        if self.parallelism == 0 {
            return Err(OrchestratorError::InvalidConfig("parallelism must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStep {
    pub package: PackageName,
    pub version: Version,
    /// Install prefix of this package.
    pub prefix: String,
    pub configure: String,
    pub build: String,
    pub install: String,
    /// Install prefixes of the packages this step builds against.
    pub dep_dirs: BTreeMap<PackageName, String>,
    pub depends_on: Vec<PackageName>,
}

impl BuildStep {
    /// The non-empty commands in execution order.
    pub fn commands(&self) -> impl Iterator<Item = &str> {
        [&self.configure, &self.build, &self.install]
            .into_iter()
            .map(String::as_str)
            .filter(|c| !c.trim().is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildPlan {
    pub parallelism: usize,
    pub steps: Vec<BuildStep>,
}

impl BuildPlan {
    pub fn render(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plan serializes");
        s.push('\n');
        s
    }

    /// One `package<TAB>command` line per command.
    pub fn dry_run_listing(&self) -> String {
        let mut out = String::new();
        for step in &self.steps {
            for cmd in step.commands() {
                let _ = writeln!(out, "{}\t{}", step.package, cmd);
            }
        }
        out
    }
}

fn is_shell_safe(c: char) -> bool {
    c.is_ascii_alphanumeric() || "/_.-+=:,@%".contains(c)
}

fn shell_quote(s: &str) -> String {
    if !s.is_empty() && s.chars().all(is_shell_safe) {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\'', r"'\''"))
    }
}

fn has_option(command: &str, key: &str) -> bool {
    // `key` ends in '='; cmake also allows a `:TYPE` annotation before it.
    let bare = key.trim_end_matches('=');
    command.split_whitespace().any(|w| {
        w.strip_prefix(bare)
            .is_some_and(|rest| rest.starts_with('=') || (bare.starts_with("-D") && rest.starts_with(':')))
    })
}

fn yes_no(b: bool) -> &'static str {
    if b { "yes" } else { "no" }
}

fn on_off(b: bool) -> &'static str {
    if b { "ON" } else { "OFF" }
}

fn cmake_tpl_name(dep: &PackageName) -> String {
    dep.as_str().to_ascii_uppercase().replace('-', "_")
}

/// The canonical options for one step as `(key, value)`, where `key` ends in `=`.
fn canonical_options(
    system: BuildSystem,
    prefix: &str,
    debug: bool,
    shared: bool,
    wide: bool,
    dep_dirs: &BTreeMap<PackageName, String>,
) -> Vec<(String, String)> {
    let mut opts = Vec::new();
    match system {
        BuildSystem::Autoconf => {
            opts.push(("--prefix=".to_string(), prefix.to_string()));
            opts.push(("--enable-debug=".into(), yes_no(debug).into()));
            opts.push(("--enable-shared=".into(), yes_no(shared).into()));
            opts.push(("--enable-64bit-indices=".into(), yes_no(wide).into()));
            for (dep, dir) in dep_dirs {
                opts.push((format!("--with-{dep}-dir="), dir.clone()));
            }
        }
        BuildSystem::Cmake => {
            opts.push(("-DCMAKE_INSTALL_PREFIX=".to_string(), prefix.to_string()));
            opts.push(("-DCMAKE_BUILD_TYPE=".into(), if debug { "Debug" } else { "Release" }.into()));
            opts.push(("-DBUILD_SHARED_LIBS=".into(), on_off(shared).into()));
            opts.push(("-DXSDK_ENABLE_64BIT_INDICES=".into(), on_off(wide).into()));
            for (dep, dir) in dep_dirs {
                opts.push((format!("-DTPL_{}_DIR=", cmake_tpl_name(dep)), dir.clone()));
            }
        }
        BuildSystem::Script => {}
    }
    opts
}

pub fn generate_build_plan(
    res: &Resolution,
    r: &Registry,
    cfg: &BuildConfig,
) -> Result<BuildPlan, OrchestratorError> {
    match &res.outcome {
        Outcome::Solved(s) => plan_for_solution(s, r, cfg),
        Outcome::Conflict(c) => Err(OrchestratorError::InvalidInput(format!(
            "cannot plan a build for an unresolved conflict on {}",
            c.package
        ))),
    }
}

pub fn plan_for_solution(s: &Solution, r: &Registry, cfg: &BuildConfig) -> Result<BuildPlan, OrchestratorError> {
    cfg.validate()?;
    let mut prefixes: BTreeMap<PackageName, String> = BTreeMap::new();
    let mut steps = Vec::new();
    for (name, version) in s.build_order() {
        let m = r.get(name.as_str(), &version).ok_or_else(|| {
            OrchestratorError::InvalidInput(format!("{name}@{version} is not in the registry"))
        })?;
        let prefix = cfg.prefix.join(format!("{name}-{version}")).display().to_string();
        let depends_on: Vec<PackageName> = s.edges(name.as_str()).iter().map(|e| e.target.clone()).collect();
        let dep_dirs: BTreeMap<PackageName, String> = depends_on
            .iter()
            .map(|d| (d.clone(), prefixes[d].clone()))
            .collect();

        let b = &m.build;
        let debug = cfg.debug;
        let shared = cfg.shared_libs && b.supports_shared;
        let wide = cfg.use_64bit && b.supports_64bit;
        let cmake = b.system == BuildSystem::Cmake;
        let bind = |p: &Placeholder| -> Option<String> {
            match p {
                Placeholder::Prefix => Some(shell_quote(&prefix)),
                Placeholder::DepDir(d) => dep_dirs.get(d).map(|dir| shell_quote(dir)),
                Placeholder::Debug => Some(if cmake { if debug { "Debug" } else { "Release" } } else { yes_no(debug) }.into()),
                Placeholder::SixtyFourBit => Some(if cmake { on_off(wide) } else { yes_no(wide) }.into()),
            }
        };
        let expand = |field: &'static str, text: &str| -> Result<String, OrchestratorError> {
            Template::parse(text)
                .and_then(|t| t.expand(bind))
                .map_err(|error| OrchestratorError::Template {
                    package: m.id(),
                    field,
                    error,
                })
        };

        let mut configure = expand("build.configure_command", &b.configure_command)?;
        for (key, value) in canonical_options(b.system, &prefix, debug, shared, wide, &dep_dirs) {
            if !has_option(&configure, &key) {
                let _ = write!(configure, " {key}{}", shell_quote(&value));
            }
        }
        let build = expand("build.build_command", &b.build_command)?;
        let install = expand("build.install_command", &b.install_command)?;

        prefixes.insert(name.clone(), prefix.clone());
        steps.push(BuildStep {
            package: name,
            version,
            prefix,
            configure,
            build,
            install,
            dep_dirs,
            depends_on,
        });
    }
    Ok(BuildPlan {
        parallelism: cfg.parallelism,
        steps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Succeeded,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub package: PackageName,
    pub status: StepStatus,
    /// The command that failed, for failed steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BuildOutcome {
    /// In plan order.
    pub steps: Vec<StepOutcome>,
}

impl BuildOutcome {
    pub fn succeeded(&self) -> bool {
        self.steps.iter().all(|s| s.status == StepStatus::Succeeded)
    }

    pub fn status_of(&self, package: &str) -> Option<StepStatus> {
        self.steps.iter().find(|s| s.package.as_str() == package).map(|s| s.status)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExecuteOptions {
    /// Logs go to `<work_dir>/logs/<package>.log`; commands run in
    /// `<work_dir>/src/<package>` when that directory exists.
    pub work_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Pending,
    Running,
    Done(StepStatus),
}

struct Board {
    states: Vec<State>,
    failed_command: Vec<Option<String>>,
    fatal: Option<OrchestratorError>,
}

impl Board {
    /// Marks steps with a failed or skipped dependency as skipped, then
    /// returns the first pending step whose dependencies all succeeded.
    fn next_ready(&mut self, deps: &[Vec<usize>]) -> Option<usize> {
        for (i, step_deps) in deps.iter().enumerate() {
            if self.states[i] != State::Pending {
                continue;
            }
            let blocked = step_deps
                .iter()
                .any(|&d| matches!(self.states[d], State::Done(StepStatus::Failed | StepStatus::Skipped)));
            if blocked {
                self.states[i] = State::Done(StepStatus::Skipped);
            }
        }
        (0..self.states.len()).find(|&i| {
            self.states[i] == State::Pending
                && deps[i].iter().all(|&d| self.states[d] == State::Done(StepStatus::Succeeded))
        })
    }

    fn finished(&self) -> bool {
        self.states.iter().all(|s| matches!(s, State::Done(_)))
    }

    fn any_running(&self) -> bool {
        self.states.contains(&State::Running)
    }
}

fn log_path(opts: &ExecuteOptions, package: &PackageName) -> Option<PathBuf> {
    opts.work_dir
        .as_ref()
        .map(|w| w.join("logs").join(format!("{package}.log")))
}

/// Runs one step's commands in order.
fn run_step(
    step: &BuildStep,
    executor: &dyn CommandExecutor,
    opts: &ExecuteOptions,
) -> Result<Result<(), String>, OrchestratorError> {
    let cwd = opts
        .work_dir
        .as_ref()
        .map(|w| w.join("src").join(step.package.as_str()))
        .filter(|d| d.is_dir());
    let mut log = String::new();
    let mut result = Ok(());
    for cmd in step.commands() {
        let mut spec = CommandSpec::new(step.package.as_str(), cmd);
        if let Some(dir) = &cwd {
            spec = spec.in_dir(dir);
        }
        let out = executor.run(&spec)?;
        let _ = writeln!(log, "$ {cmd}");
        log.push_str(&out.output);
        if !out.output.is_empty() && !out.output.ends_with('\n') {
            log.push('\n');
        }
        if !out.succeeded() {
            let _ = writeln!(log, "exit status: {:?}", out.status);
            result = Err(cmd.to_string());
            break;
        }
    }
    if let Some(path) = log_path(opts, &step.package) {
        let io_err = |source| OrchestratorError::Io { path: path.clone(), source };
        fs::create_dir_all(path.parent().expect("log file has a parent")).map_err(io_err)?;
        fs::write(&path, log).map_err(io_err)?;
    }
    Ok(result)
}

/// Runs `plan` with up to `plan.parallelism` steps at once. A step starts only
/// after every dependency succeeded; dependents of a failure are skipped.
pub fn execute_plan(
    plan: &BuildPlan,
    executor: &dyn CommandExecutor,
    opts: &ExecuteOptions,
) -> Result<BuildOutcome, OrchestratorError> {
    let index: BTreeMap<&PackageName, usize> =
        plan.steps.iter().enumerate().map(|(i, s)| (&s.package, i)).collect();
    let mut deps = Vec::with_capacity(plan.steps.len());
    for (i, step) in plan.steps.iter().enumerate() {
        let mut ds = BTreeSet::new();
        for d in &step.depends_on {
            match index.get(d) {
                Some(&j) if j < i => {
                    ds.insert(j);
                }
                _ => {
                    return Err(OrchestratorError::InvalidInput(format!(
                        "step {} depends on {d}, which is not an earlier step",
                        step.package
                    )))
                }
            }
        }
        deps.push(ds.into_iter().collect::<Vec<_>>());
    }

    let board = Mutex::new(Board {
        states: vec![State::Pending; plan.steps.len()],
        failed_command: vec![None; plan.steps.len()],
        fatal: None,
    });
    let wake = Condvar::new();

    let worker = || {
        let mut b = board.lock().expect("scheduler poisoned");
        loop {
            if b.fatal.is_some() || b.finished() {
                break;
            }
            let Some(i) = b.next_ready(&deps) else {
                if b.finished() || !b.any_running() {
                    break;
                }
                b = wake.wait(b).expect("scheduler poisoned");
                continue;
            };
            b.states[i] = State::Running;
            drop(b);
            let result = run_step(&plan.steps[i], executor, opts);
            b = board.lock().expect("scheduler poisoned");
            match result {
                Ok(Ok(())) => b.states[i] = State::Done(StepStatus::Succeeded),
                Ok(Err(cmd)) => {
                    b.states[i] = State::Done(StepStatus::Failed);
                    b.failed_command[i] = Some(cmd);
                }
                Err(e) => {
                    b.states[i] = State::Done(StepStatus::Failed);
                    b.fatal.get_or_insert(e);
                }
            }
            wake.notify_all();
        }
        drop(b);
        wake.notify_all();
    };

    let workers = plan.parallelism.max(1).min(plan.steps.len().max(1));
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(worker);
        }
    });

    let b = board.into_inner().expect("scheduler poisoned");
    if let Some(e) = b.fatal {
        return Err(e);
    }
    let steps = plan
        .steps
        .iter()
        .zip(b.states)
        .zip(b.failed_command)
        .map(|((step, state), failed_command)| {
            let status = match state {
                State::Done(s) => s,
                State::Pending | State::Running => unreachable!("all steps finish"),
            };
            let log = (status != StepStatus::Skipped)
                .then(|| log_path(opts, &step.package))
                .flatten();
            StepOutcome {
                package: step.package.clone(),
                status,
                failed_command,
                log,
            }
        })
        .collect();
    Ok(BuildOutcome { steps })
}

/// Layout violations of one install prefix.
pub fn verify_install(prefix: &Path) -> io::Result<Vec<LayoutViolation>> {
    if !prefix.is_dir() {
        return Err(io::Error::new(
            io::ErrorKind::NotFound,
            format!("install prefix {} does not exist", prefix.display()),
        ));
    }
    Ok(inspect_install(prefix)?.violations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::{CommandOutput, DryRunExecutor};
    use crate::manifest::{Dependency, DependencyKind, PackageManifest};
    use crate::resolver::{resolve, Root};
    use crate::testutil::manifest;
    use crate::version::VersionConstraint;

    fn dep(name: &str) -> Dependency {
        Dependency {
            name: name.parse().unwrap(),
            constraint: VersionConstraint::Any,
            kind: DependencyKind::Required,
        }
    }

    fn autoconf(m: &mut PackageManifest, configure: &str) {
        m.build.system = BuildSystem::Autoconf;
        m.build.configure_command = configure.into();
    }

    /// hypre and superlu are leaves; petsc needs superlu only.
    fn three() -> Registry {
        let mut petsc = manifest("petsc", "3.7.0");
        autoconf(&mut petsc, "./configure");
        petsc.dependencies = vec![dep("superlu")];
        let mut superlu = manifest("superlu", "5.2.1");
        superlu.build.configure_command = "cmake -S . -B build".into();
        let hypre = manifest("hypre", "2.11.1");
        [hypre, petsc, superlu]
            .into_iter()
            .try_fold(Registry::new(), Registry::add_manifest)
            .unwrap()
    }

    fn plan(r: &Registry, roots: &[&str], cfg: &BuildConfig) -> Result<BuildPlan, OrchestratorError> {
        let roots: Vec<Root> = roots.iter().map(|s| s.parse().unwrap()).collect();
        generate_build_plan(&resolve(r, &roots).unwrap(), r, cfg)
    }

    #[test]
    fn autoconf_flags() {
        let mut cfg = BuildConfig::new("/opt/x");
        cfg.debug = true;
        let p = plan(&three(), &["petsc"], &cfg).unwrap();
        assert_eq!(p.steps.len(), 2);
        let petsc = &p.steps[1];
        assert_eq!(
            petsc.configure,
            "./configure --prefix=/opt/x/petsc-3.7.0 --enable-debug=yes --enable-shared=no \
             --enable-64bit-indices=no --with-superlu-dir=/opt/x/superlu-5.2.1"
        );
        assert_eq!(petsc.dep_dirs.len(), 1);
    }

    #[test]
    fn cmake_leaf_gets_four_global_flags() {
        let p = plan(&three(), &["superlu"], &BuildConfig::new("/opt/x")).unwrap();
        assert_eq!(
            p.steps[0].configure,
            "cmake -S . -B build -DCMAKE_INSTALL_PREFIX=/opt/x/superlu-5.2.1 -DCMAKE_BUILD_TYPE=Release \
             -DBUILD_SHARED_LIBS=OFF -DXSDK_ENABLE_64BIT_INDICES=OFF"
        );
    }

    #[test]
    fn explicit_options_are_not_duplicated() {
        let mut m = manifest("foo", "1.0.0");
        m.build.configure_command = "cmake -DCMAKE_INSTALL_PREFIX:PATH={prefix} -DCMAKE_BUILD_TYPE={debug} .".into();
        m.build.supports_64bit = true;
        let r = Registry::new().add_manifest(m).unwrap();
        let mut cfg = BuildConfig::new("/p");
        cfg.use_64bit = true;
        cfg.shared_libs = true;
        let p = plan(&r, &["foo"], &cfg).unwrap();
        assert_eq!(
            p.steps[0].configure,
            "cmake -DCMAKE_INSTALL_PREFIX:PATH=/p/foo-1.0.0 -DCMAKE_BUILD_TYPE=Release . \
             -DBUILD_SHARED_LIBS=OFF -DXSDK_ENABLE_64BIT_INDICES=ON"
        );
    }

    #[test]
    fn script_builds_get_no_flags_and_quoted_paths() {
        let mut m = manifest("foo", "1.0.0");
        m.build.system = BuildSystem::Script;
        m.build.configure_command = "./install.sh {prefix} {64bit}".into();
        let r = Registry::new().add_manifest(m).unwrap();
        let p = plan(&r, &["foo"], &BuildConfig::new("/my dir")).unwrap();
        assert_eq!(p.steps[0].configure, "./install.sh '/my dir/foo-1.0.0' no");
    }

    #[test]
    fn unbound_dep_dir_is_template_error() {
        let mut m = manifest("foo", "1.0.0");
        m.build.configure_command = "cmake -DX={dep_dir:ghost} .".into();
        let r = Registry::new().add_manifest(m).unwrap();
        let err = plan(&r, &["foo"], &BuildConfig::new("/p")).unwrap_err();
        assert!(
            matches!(&err, OrchestratorError::Template { error: TemplateError::Unbound(_), .. }),
            "{err}"
        );
    }

    #[test]
    fn config_must_be_sane() {
        assert!(matches!(
            plan(&three(), &["hypre"], &BuildConfig::new("rel/path")),
            Err(OrchestratorError::InvalidConfig(_))
        ));
        let mut cfg = BuildConfig::new("/p");
        cfg.parallelism = 0;
        assert!(plan(&three(), &["hypre"], &cfg).is_err());
    }

    #[test]
    fn dry_run_records_plan_commands_in_order() {
        let p = plan(&three(), &["petsc", "hypre"], &BuildConfig::new("/p")).unwrap();
        let exec = DryRunExecutor::new();
        let out = execute_plan(&p, &exec, &ExecuteOptions::default()).unwrap();
        assert!(out.succeeded());
        let got: String = exec
            .recorded()
            .iter()
            .map(|s| format!("{}\t{}\n", s.label, s.command))
            .collect();
        assert_eq!(got, p.dry_run_listing());
        assert!(p.dry_run_listing().starts_with("hypre\tcmake ."));
    }

    struct FailOn(&'static str);

    impl CommandExecutor for FailOn {
        fn run(&self, spec: &CommandSpec) -> Result<CommandOutput, ExecError> {
            Ok(if spec.label == self.0 {
                CommandOutput { status: Some(2), output: "boom".into() }
            } else {
                CommandOutput::success()
            })
        }
    }

    #[test]
    fn failure_skips_dependents_only() {
        let p = plan(&three(), &["petsc", "hypre"], &BuildConfig::new("/p")).unwrap();
        let work = tempfile::tempdir().unwrap();
        let opts = ExecuteOptions { work_dir: Some(work.path().to_path_buf()) };
        let out = execute_plan(&p, &FailOn("superlu"), &opts).unwrap();
        assert_eq!(out.status_of("superlu"), Some(StepStatus::Failed));
        assert_eq!(out.status_of("petsc"), Some(StepStatus::Skipped));
        assert_eq!(out.status_of("hypre"), Some(StepStatus::Succeeded));
        let log = fs::read_to_string(work.path().join("logs/superlu.log")).unwrap();
        assert!(log.contains("boom"));
        assert!(!work.path().join("logs/petsc.log").exists());
    }

    struct NoLaunch;

    impl CommandExecutor for NoLaunch {
        fn run(&self, spec: &CommandSpec) -> Result<CommandOutput, ExecError> {
            Err(ExecError::Launch {
                command: spec.command.clone(),
                source: io::Error::from(io::ErrorKind::NotFound),
            })
        }
    }

    #[test]
    fn launch_errors_abort() {
        let p = plan(&three(), &["petsc"], &BuildConfig::new("/p")).unwrap();
        assert!(matches!(
            execute_plan(&p, &NoLaunch, &ExecuteOptions::default()),
            Err(OrchestratorError::Launch(_))
        ));
    }

    #[test]
    fn empty_plan() {
        let p = BuildPlan { parallelism: 3, steps: vec![] };
        let out = execute_plan(&p, &DryRunExecutor::new(), &ExecuteOptions::default()).unwrap();
        assert!(out.steps.is_empty());
    }

    #[test]
    fn install_verification() {
        let d = tempfile::tempdir().unwrap();
        fs::create_dir_all(d.path().join("lib64")).unwrap();
        fs::write(d.path().join("lib64/libx.a"), "").unwrap();
        let v = verify_install(d.path()).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].to_string(), "library outside lib/: lib64/libx.a");
        assert!(verify_install(Path::new("/no/such/prefix")).is_err());
    }
}
