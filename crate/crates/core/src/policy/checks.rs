use std::io;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use walkdir::WalkDir;

use super::{AuditContext, AuditError, AuditMode, PolicyCheckResult, PolicyId, Status, EXPORTS_FILE_NAME};
use crate::exec::CommandSpec;
use crate::layout::{inspect_install, InstallLayout};
use crate::manifest::BuildSystem;
use crate::resolver::{explain_conflict, resolve, Outcome, Root};
use crate::scan::{self, Pattern};
use crate::template::{Placeholder, Template};
use crate::version::VersionConstraint;

static EMAIL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[^\s@<>]+@[^\s@<>]+\.[^\s@<>]+$").expect("valid regex"));
static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^https?://[^\s/]+\S*$").expect("valid regex"));

const NOT_CHECKABLE: &str = "not checkable in this mode and not attested";
const ATTESTATION_ONLY: &str = "not machine-checkable and not attested";

type CheckResult = Result<PolicyCheckResult, AuditError>;

fn verified(p: PolicyId, evidence: Vec<String>) -> CheckResult {
    Ok(PolicyCheckResult::new(p, Status::Verified, evidence))
}

fn failed(p: PolicyId, evidence: Vec<String>) -> CheckResult {
    Ok(PolicyCheckResult::new(p, Status::Failed, evidence))
}

fn attested_or(p: PolicyId, ctx: &AuditContext<'_>, reason: &str) -> CheckResult {
    if ctx.manifest.attestation(p).is_some() {
        Ok(PolicyCheckResult::new(p, Status::Attested, vec![]))
    } else {
        failed(p, vec![reason.to_string()])
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> AuditError + '_ {
    move |source| AuditError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Evaluates one policy. A policy failure is a status; only unreadable inputs
/// and commands that cannot be launched are errors.
pub fn run_policy_check(p: PolicyId, ctx: &AuditContext<'_>) -> CheckResult {
    match p {
        PolicyId::M1 => check_configure_options(ctx),
        PolicyId::M2 => check_test_suite(ctx),
        PolicyId::M3 => check_mpi_communicator(ctx),
        PolicyId::M4 | PolicyId::M6 | PolicyId::R4 => attested_or(p, ctx, ATTESTATION_ONLY),
        PolicyId::M5 => check_contact(ctx),
        PolicyId::M7 => check_license(ctx),
        PolicyId::M8 => check_version_api(ctx),
        PolicyId::M9 => check_namespace(ctx),
        PolicyId::M10 => check_repository(ctx),
        PolicyId::M11 => check_print_statements(ctx),
        PolicyId::M12 => check_external_software(ctx),
        PolicyId::M13 => check_install_layout(ctx),
        PolicyId::M14 => check_64bit(ctx),
        PolicyId::R1 => check_public_repository(ctx),
        PolicyId::R2 => check_memcheck(ctx),
        PolicyId::R3 => check_error_doc(ctx),
        PolicyId::R5 => check_dependency_export(ctx),
    }
}

/// `{prefix}` and one `{dep_dir:<name>}` per required dependency, as missing-item evidence.
fn missing_configure_bindings(ctx: &AuditContext<'_>) -> Result<Vec<String>, String> {
    let m = ctx.manifest;
    let template = Template::parse(&m.build.configure_command)
        .map_err(|e| format!("configure_command: {e}"))?;
    let mut missing = Vec::new();
    if !template.references(&Placeholder::Prefix) {
        missing.push("configure_command lacks {prefix}".to_string());
    }
    for dep in m.required_dependencies() {
        let want = Placeholder::DepDir(dep.name.clone());
        if !template.references(&want) {
            missing.push(format!("configure_command lacks {want}"));
        }
    }
    Ok(missing)
}

fn check_configure_options(ctx: &AuditContext<'_>) -> CheckResult {
    let p = PolicyId::M1;
    let system = ctx.manifest.build.system;
    if system == BuildSystem::Script {
        return attested_or(p, ctx, "build system script does not take the standard configure options");
    }
    match missing_configure_bindings(ctx) {
        Err(e) => failed(p, vec![e]),
        Ok(missing) if missing.is_empty() => verified(
            p,
            vec![format!(
                "{system} configure template binds {{prefix}} and {} required dependency dir(s)",
                ctx.manifest.required_dependencies().count()
            )],
        ),
        Ok(missing) => failed(p, missing),
    }
}

fn run_in_source(ctx: &AuditContext<'_>, p: PolicyId, command: String) -> CheckResult {
    let spec = CommandSpec::new(ctx.manifest.name.as_str(), command.clone()).in_dir(&ctx.source_root);
    let out = ctx.executor.run(&spec)?;
    if out.succeeded() {
        verified(p, vec![format!("`{command}` exited 0")])
    } else {
        let status = out
            .status
            .map(|c| format!("status {c}"))
            .unwrap_or_else(|| "a signal".to_string());
        let mut evidence = vec![format!("`{command}` exited with {status}")];
        evidence.extend(out.output.lines().rev().take(5).map(str::to_string).collect::<Vec<_>>().into_iter().rev());
        failed(p, evidence)
    }
}

fn check_test_suite(ctx: &AuditContext<'_>) -> CheckResult {
    let p = PolicyId::M2;
    let Some(cmd) = ctx.manifest.test_command.as_deref().filter(|c| !c.trim().is_empty()) else {
        return failed(p, vec!["no test_command declared".into()]);
    };
    match ctx.mode {
        AuditMode::Static => verified(p, vec![format!("test_command declared: {cmd}")]),
        AuditMode::Execute => run_in_source(ctx, p, cmd.to_string()),
    }
}

fn scanned_sources(ctx: &AuditContext<'_>, exclude: &[String]) -> Result<Vec<std::path::PathBuf>, AuditError> {
    Ok(scan::source_files(&ctx.source_root)
        .map_err(io_err(&ctx.source_root))?
        .into_iter()
        .filter(|rel| !scan::is_excluded(rel, exclude))
        .collect())
}

fn check_mpi_communicator(ctx: &AuditContext<'_>) -> CheckResult {
    let p = PolicyId::M3;
    let files = scanned_sources(ctx, &ctx.config.mpi_exclude_dirs)?;
    let hits = scan::scan(&ctx.source_root, &files, &[Pattern::token("MPI_COMM_WORLD")])
        .map_err(io_err(&ctx.source_root))?;
    if hits.is_empty() {
        verified(p, vec![format!("no MPI_COMM_WORLD in {} scanned source file(s)", files.len())])
    } else {
        failed(p, hits.iter().map(|h| format!("{}:{}", h.path, h.line)).collect())
    }
}

fn check_contact(ctx: &AuditContext<'_>) -> CheckResult {
    let p = PolicyId::M5;
    let contact = ctx.manifest.contact.trim();
    if EMAIL.is_match(contact) {
        verified(p, vec![format!("contact email: {contact}")])
    } else if URL.is_match(contact) {
        verified(p, vec![format!("contact URL: {contact}")])
    } else if contact.is_empty() {
        failed(p, vec!["contact is blank".into()])
    } else {
        failed(p, vec![format!("contact {contact:?} is neither an email address nor an http(s) URL")])
    }
}

fn check_license(ctx: &AuditContext<'_>) -> CheckResult {
    let p = PolicyId::M7;
    let license = ctx.manifest.license.trim();
    if ctx.config.license_allowed(license) {
        verified(p, vec![format!("license {license} is on the open-source allowlist")])
    } else {
        failed(p, vec![format!("license {license:?} is not on the open-source allowlist")])
    }
}

fn check_version_api(ctx: &AuditContext<'_>) -> CheckResult {
    let p = PolicyId::M8;
    let Some(symbol) = ctx.manifest.version_api.as_deref().map(str::trim).filter(|s| !s.is_empty()) else {
        return failed(p, vec!["no version_api declared".into()]);
    };
    let pattern = Pattern::token(symbol);
    let files = scanned_sources(ctx, &[])?;
    let hits = scan::scan(&ctx.source_root, &files, std::slice::from_ref(&pattern))
        .map_err(io_err(&ctx.source_root))?;
    if let Some(h) = hits.first() {
        return verified(p, vec![format!("{symbol} found at {}:{}", h.path, h.line)]);
    }
    let exports = ctx.source_root.join(EXPORTS_FILE_NAME);
    if exports.is_file() {
        let listed = read_exports(&exports)?;
        if let Some((line, _)) = listed.iter().find(|(_, s)| s == symbol) {
            return verified(p, vec![format!("{symbol} listed at {EXPORTS_FILE_NAME}:{line}")]);
        }
    }
    failed(p, vec![format!("version_api {symbol} not found in the source tree or {EXPORTS_FILE_NAME}")])
}

/// Symbols with their 1-based line numbers; blank lines and `#` comments skipped.
fn read_exports(path: &Path) -> Result<Vec<(usize, String)>, AuditError> {
    let text = scan::read_lossy(path).map_err(io_err(path))?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| (i, l.to_string()))
        .collect())
}

/// The install prefix layout, when a prefix was given.
fn install_layout(ctx: &AuditContext<'_>) -> Result<Option<InstallLayout>, AuditError> {
    match &ctx.install_prefix {
        None => Ok(None),
        Some(prefix) => inspect_install(prefix).map(Some).map_err(io_err(prefix)),
    }
}

fn check_namespace(ctx: &AuditContext<'_>) -> CheckResult {
    let p = PolicyId::M9;
    let prefixes = &ctx.manifest.namespace_prefixes;
    if prefixes.is_empty() {
        return failed(p, vec!["namespace_prefixes empty".into()]);
    }
    let exports = ctx.source_root.join(EXPORTS_FILE_NAME);
    if !exports.is_file() {
        return attested_or(p, ctx, NOT_CHECKABLE);
    }
    let in_namespace = |s: &str| prefixes.iter().any(|pre| !pre.is_empty() && s.starts_with(pre.as_str()));

    let symbols = read_exports(&exports)?;
    let mut evidence: Vec<String> = symbols
        .iter()
        .filter(|(_, s)| !in_namespace(s))
        .map(|(line, s)| format!("exported symbol outside namespace: {s} ({EXPORTS_FILE_NAME}:{line})"))
        .collect();
    let headers = install_layout(ctx)?.map(|l| l.headers).unwrap_or_default();
    for h in &headers {
        let file_name = h.rsplit('/').next().unwrap_or(h);
        if !in_namespace(file_name) {
            evidence.push(format!("installed header outside namespace: {h}"));
        }
    }
    if evidence.is_empty() {
        verified(
            p,
            vec![format!(
                "{} exported symbol(s) and {} installed header(s) use prefixes {}",
                symbols.len(),
                headers.len(),
                prefixes.join(", ")
            )],
        )
    } else {
        failed(p, evidence)
    }
}

fn repo_url<'a>(ctx: &AuditContext<'a>) -> Option<&'a str> {
    ctx.manifest.repo_url.as_deref().map(str::trim).filter(|u| !u.is_empty())
}

fn check_repository(ctx: &AuditContext<'_>) -> CheckResult {
    let p = PolicyId::M10;
    match repo_url(ctx) {
        Some(url) => verified(p, vec![format!("repository: {url}")]),
        None => failed(p, vec!["no repo_url declared".into()]),
    }
}

fn check_public_repository(ctx: &AuditContext<'_>) -> CheckResult {
    let p = PolicyId::R1;
    match repo_url(ctx) {
        None => Ok(PolicyCheckResult::new(
            p,
            Status::NotApplicable,
            vec!["no repository declared (see M10)".into()],
        )),
        Some(url) if ctx.manifest.repo_public => verified(p, vec![format!("public repository: {url}")]),
        Some(url) => failed(p, vec![format!("repository {url} is not public (repo_public = false)")]),
    }
}

fn check_print_statements(ctx: &AuditContext<'_>) -> CheckResult {
    let p = PolicyId::M11;
    let files = scanned_sources(ctx, &ctx.config.print_exclude_dirs)?;
    let patterns: Vec<Pattern> = ctx.config.print_patterns.iter().map(Pattern::literal).collect();
    let hits = scan::scan(&ctx.source_root, &files, &patterns).map_err(io_err(&ctx.source_root))?;
    if hits.is_empty() {
        verified(p, vec![format!("no hardwired print or IO in {} scanned source file(s)", files.len())])
    } else {
        failed(
            p,
            hits.iter()
                .map(|h| format!("{}:{}: {}", h.path, h.line, h.pattern))
                .collect(),
        )
    }
}

fn check_external_software(ctx: &AuditContext<'_>) -> CheckResult {
    let p = PolicyId::M12;
    let deps = &ctx.manifest.dependencies;
    let mut evidence = Vec::new();
    for entry in WalkDir::new(&ctx.source_root).sort_by_file_name() {
        let entry = entry.map_err(|e| AuditError::Io {
            path: ctx.source_root.clone(),
            source: e.into(),
        })?;
        if !entry.file_type().is_dir() {
            continue;
        }
        let Some(parent) = entry.path().parent().and_then(|d| d.file_name()) else { continue };
        if parent != "third_party" && parent != "external" {
            continue;
        }
        let name = entry.file_name().to_string_lossy();
        if let Some(dep) = deps.iter().find(|d| d.name.as_str().eq_ignore_ascii_case(&name)) {
            let rel = entry.path().strip_prefix(&ctx.source_root).expect("under root");
            evidence.push(format!("vendored copy of {} at {}", dep.name, scan::display_path(rel)));
        }
    }
    // Outside copies are found through {dep_dir:*}; {prefix} is M1's business.
    match missing_configure_bindings(ctx) {
        Ok(missing) => evidence.extend(missing.into_iter().filter(|m| m.contains("{dep_dir:"))),
        Err(e) => evidence.push(e),
    }
    if evidence.is_empty() {
        verified(
            p,
            vec![format!(
                "no vendored copies of {} declared dependencies; configure binds every required dependency dir",
                deps.len()
            )],
        )
    } else {
        failed(p, evidence)
    }
}

fn check_install_layout(ctx: &AuditContext<'_>) -> CheckResult {
    let p = PolicyId::M13;
    let Some(layout) = install_layout(ctx)? else {
        return attested_or(p, ctx, NOT_CHECKABLE);
    };
    if layout.violations.is_empty() {
        verified(
            p,
            vec![format!(
                "install layout conforms: {} header(s) under include/, {} library file(s) under lib/",
                layout.headers.len(),
                layout.libraries.len()
            )],
        )
    } else {
        failed(p, layout.violations.iter().map(ToString::to_string).collect())
    }
}

fn check_64bit(ctx: &AuditContext<'_>) -> CheckResult {
    let p = PolicyId::M14;
    let build = &ctx.manifest.build;
    if !build.supports_64bit {
        return failed(p, vec!["build.supports_64bit is false".into()]);
    }
    let mut evidence = vec!["build.supports_64bit = true".to_string()];
    if ctx.mode == AuditMode::Execute {
        match build.system {
            BuildSystem::Autoconf | BuildSystem::Cmake => {
                evidence.push(format!("{} builds receive the canonical 64-bit index option", build.system))
            }
            BuildSystem::Script => {
                let expands = Template::parse(&build.configure_command)
                    .map(|t| t.references(&Placeholder::SixtyFourBit))
                    .unwrap_or(false);
                if !expands {
                    return failed(p, vec!["script configure_command never expands {64bit}".into()]);
                }
                evidence.push("configure_command expands {64bit}".into());
            }
        }
    }
    verified(p, evidence)
}

fn check_memcheck(ctx: &AuditContext<'_>) -> CheckResult {
    let p = PolicyId::R2;
    if ctx.mode == AuditMode::Static {
        return attested_or(p, ctx, NOT_CHECKABLE);
    }
    let Some(cmd) = ctx.manifest.test_command.as_deref().filter(|c| !c.trim().is_empty()) else {
        return failed(p, vec!["no test_command declared".into()]);
    };
    run_in_source(ctx, p, format!("{} {cmd}", ctx.config.memcheck_prefix))
}

fn check_error_doc(ctx: &AuditContext<'_>) -> CheckResult {
    let p = PolicyId::R3;
    let Some(doc) = ctx.manifest.error_handling_doc.as_deref().filter(|d| !d.trim().is_empty()) else {
        return failed(p, vec!["no error_handling_doc declared".into()]);
    };
    if ctx.source_root.join(doc).is_file() {
        verified(p, vec![format!("error handling documented in {doc}")])
    } else {
        failed(p, vec![format!("error_handling_doc {doc} does not exist")])
    }
}

fn check_dependency_export(ctx: &AuditContext<'_>) -> CheckResult {
    let p = PolicyId::R5;
    let Some(registry) = ctx.registry else {
        return attested_or(p, ctx, NOT_CHECKABLE);
    };
    let m = ctx.manifest;
    let mut registry = registry.clone();
    if let Err(e) = registry.upsert(m.clone()) {
        return failed(p, vec![e.to_string()]);
    }
    let root = Root::new(m.name.clone(), VersionConstraint::exact(m.version.clone()));
    let res = match resolve(&registry, &[root]) {
        Ok(res) => res,
        Err(e) => return failed(p, vec![format!("dependencies do not resolve: {e}")]),
    };
    match &res.outcome {
        Outcome::Conflict(c) => failed(p, explain_conflict(c).lines().map(str::to_string).collect()),
        Outcome::Solved(s) => {
            let list = s
                .export_dependency_list(m.name.as_str())
                .expect("root is assigned in its own resolution");
            let rendered = if list.is_empty() {
                "no library dependencies to export".to_string()
            } else {
                format!(
                    "ordered dependency list: {}",
                    list.iter().map(|(n, v)| format!("{n}@{v}")).collect::<Vec<_>>().join(", ")
                )
            };
            verified(p, vec![rendered])
        }
    }
}
