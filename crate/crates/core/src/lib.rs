//! Package registry, dependency resolution, policy auditing, release planning,
//! interoperability reporting and build orchestration for an ecosystem of
//! independently developed scientific libraries.

pub mod exec;
pub mod interop;
pub mod layout;
pub mod lockfile;
pub mod manifest;
pub mod orchestrator;
pub mod policy;
pub mod registry;
pub mod release;
pub mod resolver;
pub mod scan;
pub mod template;
pub mod version;

#[cfg(test)]
mod testutil;

pub use manifest::{parse_manifest, render_manifest, validate_manifest, PackageManifest, PackageName};
pub use registry::Registry;
pub use resolver::{resolve, Resolution, Root, Solution};
pub use version::{Version, VersionConstraint};
