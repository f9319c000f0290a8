fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    let header = std::path::Path::new(&crate_dir)
        .join("include")
        .join("ermdp.h");
    // The header is a committed artifact; fail the build if it cannot be
    // regenerated so drift never goes unnoticed.
    cbindgen::generate(&crate_dir)
        .expect("cbindgen failed to generate ermdp.h")
        .write_to_file(header);
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
}
