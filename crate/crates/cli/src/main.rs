use std::collections::BTreeMap;
use std::env;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ecoforge_core::exec::{CommandExecutor, ShellExecutor};
use ecoforge_core::interop::{matrix_for_solution, render_matrix, MatrixFormat};
use ecoforge_core::lockfile::Lockfile;
use ecoforge_core::manifest::MANIFEST_FILE_NAME;
use ecoforge_core::orchestrator::{execute_plan, plan_for_solution, BuildConfig, ExecuteOptions, StepStatus};
use ecoforge_core::policy::{
    audit_package, render_report, AuditConfig, AuditContext, AuditMode, ReportFormat, CONFIG_ENV_VAR,
    CONFIG_FILE_NAME,
};
use ecoforge_core::release::{plan_release, validate_release, BumpLevel, ReleaseError, ReleasePlan, ReleaseSnapshot};
use ecoforge_core::resolver::{explain_conflict, Outcome, Resolution};
use ecoforge_core::{parse_manifest, resolve, PackageManifest, Registry, Root, Version, VersionConstraint};

#[derive(Parser)]
#[command(name = "ecoforge", version, about = "Resolve, audit, release and build a scientific library ecosystem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Dot,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Static,
    Execute,
}

#[derive(Args)]
struct RegistryArg {
    /// Registry root: <dir>/<name>/<version>/package.xsdk.json
    #[arg(long, value_name = "DIR")]
    registry: PathBuf,
}

#[derive(Args)]
struct FormatArg {
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Args)]
struct ReleaseFiles {
    /// Snapshot of the previous release
    #[arg(long, value_name = "FILE")]
    prev: PathBuf,
    /// Snapshot listing the proposed component versions
    #[arg(long, value_name = "FILE")]
    proposed: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate every manifest in a registry
    Ingest {
        #[command(flatten)]
        registry: RegistryArg,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Pick one version per package satisfying every constraint
    Resolve {
        #[command(flatten)]
        registry: RegistryArg,
        /// name or name@constraint; repeatable
        #[arg(long = "root", value_name = "ROOT", required = true)]
        roots: Vec<Root>,
        /// Write the lockfile here
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Check one package against the 19 community policies
    Audit {
        /// Registry holding the package (also used for the R5 check)
        #[arg(long, value_name = "DIR")]
        registry: Option<PathBuf>,
        /// name or name@version; defaults to the manifest in --source
        #[arg(long, value_name = "PACKAGE")]
        package: Option<String>,
        #[arg(long, value_name = "DIR")]
        source: PathBuf,
        /// Install prefix to inspect
        #[arg(long, value_name = "DIR")]
        prefix: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "static")]
        mode: Mode,
        /// Audit settings; overrides $ECOFORGE_CONFIG
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Compute the release level required by a set of component updates
    PlanRelease {
        #[command(flatten)]
        files: ReleaseFiles,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Check a proposed release against a target release level
    ValidateRelease {
        #[command(flatten)]
        files: ReleaseFiles,
        #[arg(long, value_name = "LEVEL")]
        target: BumpLevel,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Pairwise interoperability levels of a resolved package set
    InteropReport {
        #[command(flatten)]
        registry: RegistryArg,
        /// Defaults to every package in the registry
        #[arg(long = "root", value_name = "ROOT")]
        roots: Vec<Root>,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Generate (and optionally run) the build plan
    Build {
        #[command(flatten)]
        registry: RegistryArg,
        #[arg(long = "root", value_name = "ROOT", conflicts_with = "lock")]
        roots: Vec<Root>,
        /// Build exactly the versions pinned by this lockfile
        #[arg(long, value_name = "FILE")]
        lock: Option<PathBuf>,
        /// Absolute install root; each package goes to <prefix>/<name>-<version>
        #[arg(long, value_name = "DIR")]
        prefix: PathBuf,
        #[arg(long)]
        debug: bool,
        #[arg(long)]
        shared: bool,
        #[arg(long = "64bit")]
        wide: bool,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
        jobs: u16,
        /// Print the commands without running them (the default)
        #[arg(long, overrides_with = "no_dry_run")]
        dry_run: bool,
        /// Run the commands
        #[arg(long, overrides_with = "dry_run")]
        no_dry_run: bool,
        /// Logs go to <workdir>/logs; sources are looked up in <workdir>/src/<package>
        #[arg(long, value_name = "DIR", default_value = ".")]
        workdir: PathBuf,
        #[command(flatten)]
        format: FormatArg,
    },
    /// Ordered list of a package's library dependencies
    ExportDeps {
        #[command(flatten)]
        registry: RegistryArg,
        /// name or name@version
        #[arg(long, value_name = "PACKAGE")]
        package: String,
        #[command(flatten)]
        format: FormatArg,
    },
}

/// How a command ended, mapped onto the exit code.
enum Failure {
    /// A well-formed negative result (conflict, non-compliance, violations).
    Negative,
    Usage(String),
    /// Unreadable or invalid input.
    Data(String),
}

type CmdResult = Result<(), Failure>;

fn data(e: impl std::fmt::Display) -> Failure {
    Failure::Data(e.to_string())
}

fn out(text: &str) {
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(text.as_bytes());
}

fn json(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

fn text_or_json(f: &FormatArg) -> Result<bool, Failure> {
    match f.format {
        Format::Text => Ok(false),
        Format::Json => Ok(true),
        Format::Dot => Err(Failure::Usage("--format dot is only supported by interop-report".into())),
    }
}

fn load_registry(dir: &Path) -> Result<Registry, Failure> {
    let ingested = Registry::ingest_directory(dir).map_err(data)?;
    for w in &ingested.warnings {
        eprintln!("{w}");
    }
    Ok(ingested.registry)
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Data(format!("cannot read {}: {e}", path.display())))
}

/// `name` (newest version) or `name@version`.
fn find_package<'r>(r: &'r Registry, spec: &str) -> Result<&'r PackageManifest, Failure> {
    let (name, version) = match spec.split_once('@') {
        Some((n, v)) => (n, Some(v.parse::<Version>().map_err(|e| Failure::Usage(e.to_string()))?)),
        None => (spec, None),
    };
    let found = match &version {
        Some(v) => r.get(name, v),
        None => r.newest(name),
    };
    found.ok_or_else(|| {
        Failure::Data(match version {
            Some(v) => format!("unknown package {name}@{v}"),
            None => format!("unknown package {name}"),
        })
    })
}

fn print_conflict(res: &Resolution, as_json: bool) -> Failure {
    let Outcome::Conflict(c) = &res.outcome else { unreachable!("called on conflicts only") };
    eprint!("{}", explain_conflict(c));
    if as_json {
        out(&json(c));
    }
    Failure::Negative
}

fn cmd_ingest(registry: &RegistryArg, format: &FormatArg) -> CmdResult {
    let as_json = text_or_json(format)?;
    let r = load_registry(&registry.registry)?;
    let listing: BTreeMap<String, Vec<String>> = r
        .names()
        .map(|n| (n.to_string(), r.manifests(n.as_str()).iter().map(|m| m.version.to_string()).collect()))
        .collect();
    if as_json {
        out(&json(&listing));
    } else {
        let mut s = format!("ingested {} manifest(s) for {} package(s)\n", r.len(), r.package_count());
        for (name, versions) in &listing {
            s.push_str(&format!("{name}: {}\n", versions.join(", ")));
        }
        out(&s);
    }
    Ok(())
}

fn cmd_resolve(registry: &RegistryArg, roots: &[Root], output: Option<&Path>, format: &FormatArg) -> CmdResult {
    let as_json = text_or_json(format)?;
    let r = load_registry(&registry.registry)?;
    let res = resolve(&r, roots).map_err(data)?;
    let Some(solution) = res.solution() else {
        return Err(print_conflict(&res, as_json));
    };
    let lock = Lockfile::new(roots, solution);
    if let Some(path) = output {
        fs::write(path, lock.render()).map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))?;
    }
    if as_json {
        out(&lock.render());
    } else {
        let mut s = String::new();
        for p in &lock.build_order {
            s.push_str(&format!("{} {}\n", p.name, p.version));
        }
        out(&s);
    }
    Ok(())
}

fn audit_config(explicit: Option<&Path>, source: &Path) -> Result<AuditConfig, Failure> {
    let from_env = env::var_os(CONFIG_ENV_VAR).map(PathBuf::from);
    let in_source = Some(source.join(CONFIG_FILE_NAME)).filter(|p| p.is_file());
    match explicit.map(Path::to_path_buf).or(from_env).or(in_source) {
        Some(path) => AuditConfig::load(&path).map_err(data),
        None => Ok(AuditConfig::default()),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_audit(
    registry: Option<&Path>,
    package: Option<&str>,
    source: &Path,
    prefix: Option<&Path>,
    mode: Mode,
    config: Option<&Path>,
    format: &FormatArg,
) -> CmdResult {
    let as_json = text_or_json(format)?;
    let config = audit_config(config, source)?;
    let registry = registry.map(load_registry).transpose()?;
    let manifest = match (&registry, package) {
        (Some(r), Some(spec)) => find_package(r, spec)?.clone(),
        (None, Some(_)) => return Err(Failure::Usage("--package needs --registry".into())),
        (_, None) => {
            let path = source.join(MANIFEST_FILE_NAME);
            parse_manifest(&read(&path)?).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?
        }
    };
    let mode = match mode {
        Mode::Static => AuditMode::Static,
        Mode::Execute => AuditMode::Execute,
    };
    let executor = ShellExecutor;
    let ctx = AuditContext {
        manifest: &manifest,
        source_root: source.to_path_buf(),
        install_prefix: prefix.map(Path::to_path_buf),
        mode,
        registry: registry.as_ref(),
        config,
        executor: &executor,
    };
    let report = audit_package(&ctx).map_err(|e| match e {
        ecoforge_core::policy::AuditError::MissingInstallPrefix => Failure::Usage(e.to_string()),
        e => data(e),
    })?;
    out(&render_report(&report, if as_json { ReportFormat::Json } else { ReportFormat::Text }));
    if report.xsdk_compatible {
        Ok(())
    } else {
        Err(Failure::Negative)
    }
}

fn release_plan(files: &ReleaseFiles) -> Result<ReleasePlan, Failure> {
    let prev = ReleaseSnapshot::parse(&read(&files.prev)?)
        .map_err(|e| Failure::Data(format!("{}: {e}", files.prev.display())))?;
    let proposed = ReleaseSnapshot::parse(&read(&files.proposed)?)
        .map_err(|e| Failure::Data(format!("{}: {e}", files.proposed.display())))?;
    match plan_release(&prev, &proposed.components) {
        Ok(plan) => Ok(plan),
        Err(ReleaseError::EmptyPlan) => {
            eprintln!("{}", ReleaseError::EmptyPlan);
            Err(Failure::Negative)
        }
        Err(e) => Err(data(e)),
    }
}

fn describe_plan(plan: &ReleasePlan) -> String {
    let mut s = format!(
        "required level: {}, next version: {}\n",
        plan.required_level, plan.proposed_sdk_version
    );
    for (name, bump) in &plan.component_bumps {
        let old = &plan.previous.components[name];
        let new = &plan.proposed_components[name];
        s.push_str(&format!("  {name} {old} -> {new} ({bump})\n"));
    }
    for name in &plan.additions {
        s.push_str(&format!("  {name} added at {}\n", plan.proposed_components[name]));
    }
    for name in &plan.removals {
        s.push_str(&format!("  {name} removed\n"));
    }
    s
}

fn cmd_plan_release(files: &ReleaseFiles, format: &FormatArg) -> CmdResult {
    let as_json = text_or_json(format)?;
    let plan = release_plan(files)?;
    out(&if as_json { json(&plan) } else { describe_plan(&plan) });
    Ok(())
}

fn cmd_validate_release(files: &ReleaseFiles, target: BumpLevel, format: &FormatArg) -> CmdResult {
    let as_json = text_or_json(format)?;
    let plan = release_plan(files)?;
    let violations = validate_release(&plan, target);
    if as_json {
        out(&json(&violations));
    } else if violations.is_empty() {
        out(&format!(
            "ok: {target} release {} satisfies the release rules\n",
            ecoforge_core::release::bump(&plan.previous.sdk_version, target)
        ));
    } else {
        let mut s = String::new();
        for v in &violations {
            s.push_str(&format!("{v}\n"));
        }
        out(&s);
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Negative)
    }
}

fn all_roots(r: &Registry) -> Vec<Root> {
    r.names().map(|n| Root::any(n.clone())).collect()
}

fn cmd_interop(registry: &RegistryArg, roots: &[Root], format: &FormatArg) -> CmdResult {
    let r = load_registry(&registry.registry)?;
    let roots = if roots.is_empty() { all_roots(&r) } else { roots.to_vec() };
    let res = resolve(&r, &roots).map_err(data)?;
    let Some(solution) = res.solution() else {
        return Err(print_conflict(&res, format.format == Format::Json));
    };
    let mx = matrix_for_solution(&r, solution).map_err(data)?;
    let f = match format.format {
        Format::Text => MatrixFormat::Text,
        Format::Json => MatrixFormat::Json,
        Format::Dot => MatrixFormat::Dot,
    };
    out(&render_matrix(&mx, f));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_build(
    registry: &RegistryArg,
    roots: &[Root],
    lock: Option<&Path>,
    cfg: BuildConfig,
    dry_run: bool,
    workdir: &Path,
    format: &FormatArg,
) -> CmdResult {
    let as_json = text_or_json(format)?;
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let r = load_registry(&registry.registry)?;
    let solution = match lock {
        Some(path) => {
            let lf = Lockfile::parse(&read(path)?).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
            lf.to_solution(&r).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?
        }
        None if roots.is_empty() => return Err(Failure::Usage("build needs --root or --lock".into())),
        None => {
            let res = resolve(&r, roots).map_err(data)?;
            match res.outcome {
                Outcome::Solved(s) => s,
                Outcome::Conflict(_) => return Err(print_conflict(&res, as_json)),
            }
        }
    };
    let plan = plan_for_solution(&solution, &r, &cfg).map_err(data)?;
    if dry_run {
        out(&if as_json { plan.render() } else { plan.dry_run_listing() });
        return Ok(());
    }
    let executor: &dyn CommandExecutor = &ShellExecutor;
    let outcome = execute_plan(
        &plan,
        executor,
        &ExecuteOptions {
            work_dir: Some(workdir.to_path_buf()),
        },
    )
    .map_err(data)?;
    if as_json {
        out(&json(&outcome));
    } else {
        let mut s = String::new();
        for step in &outcome.steps {
            let status = match step.status {
                StepStatus::Succeeded => "succeeded",
                StepStatus::Failed => "failed",
                StepStatus::Skipped => "skipped",
            };
            s.push_str(&format!("{}\t{status}", step.package));
            if let Some(cmd) = &step.failed_command {
                s.push_str(&format!("\t{cmd}"));
            }
            s.push('\n');
        }
        out(&s);
    }
    if outcome.succeeded() {
        Ok(())
    } else {
        Err(Failure::Negative)
    }
}

fn cmd_export_deps(registry: &RegistryArg, package: &str, format: &FormatArg) -> CmdResult {
    let as_json = text_or_json(format)?;
    let r = load_registry(&registry.registry)?;
    let m = find_package(&r, package)?;
    let root = Root::new(m.name.clone(), VersionConstraint::exact(m.version.clone()));
    let res = resolve(&r, &[root]).map_err(data)?;
    let Some(solution) = res.solution() else {
        return Err(print_conflict(&res, as_json));
    };
    let list = solution.export_dependency_list(m.name.as_str()).map_err(data)?;
    if as_json {
        let doc: Vec<_> = list
            .iter()
            .map(|(n, v)| serde_json::json!({"name": n, "version": v}))
            .collect();
        out(&json(&doc));
    } else {
        let mut s = String::new();
        for (n, v) in &list {
            s.push_str(&format!("{n} {v}\n"));
        }
        out(&s);
    }
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Ingest { registry, format } => cmd_ingest(&registry, &format),
        Command::Resolve { registry, roots, output, format } => {
            cmd_resolve(&registry, &roots, output.as_deref(), &format)
        }
        Command::Audit { registry, package, source, prefix, mode, config, format } => cmd_audit(
            registry.as_deref(),
            package.as_deref(),
            &source,
            prefix.as_deref(),
            mode,
            config.as_deref(),
            &format,
        ),
        Command::PlanRelease { files, format } => cmd_plan_release(&files, &format),
        Command::ValidateRelease { files, target, format } => cmd_validate_release(&files, target, &format),
        Command::InteropReport { registry, roots, format } => cmd_interop(&registry, &roots, &format),
        Command::Build {
            registry,
            roots,
            lock,
            prefix,
            debug,
            shared,
            wide,
            jobs,
            dry_run: _,
            no_dry_run,
            workdir,
            format,
        } => {
            let cfg = BuildConfig {
                prefix,
                debug,
                shared_libs: shared,
                use_64bit: wide,
                parallelism: jobs as usize,
            };
            cmd_build(&registry, &roots, lock.as_deref(), cfg, !no_dry_run, &workdir, &format)
        }
        Command::ExportDeps { registry, package, format } => cmd_export_deps(&registry, &package, &format),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Negative) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
