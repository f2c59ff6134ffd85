use crate::manifest::{BuildSpec, BuildSystem, PackageManifest};

pub(crate) fn manifest(name: &str, version: &str) -> PackageManifest {
    PackageManifest {
        name: name.parse().unwrap(),
        version: version.parse().unwrap(),
        license: "MIT".into(),
        contact: "dev@example.org".into(),
        repo_url: None,
        repo_public: false,
        dependencies: vec![],
        build: BuildSpec {
            system: BuildSystem::Cmake,
            configure_command: "cmake .".into(),
            build_command: "make".into(),
            install_command: "make install".into(),
            supports_64bit: false,
            supports_shared: false,
        },
        namespace_prefixes: vec!["X_".into()],
        test_command: None,
        version_api: None,
        error_handling_doc: None,
        interop: vec![],
        attestations: Default::default(),
    }
}
