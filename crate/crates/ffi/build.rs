fn main() {
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    cbindgen::Builder::new()
        .with_crate(".")
        .with_config(cbindgen::Config::from_file("cbindgen.toml").expect("read cbindgen.toml"))
        .generate()
        .expect("generate C bindings")
        .write_to_file("include/curvesolve.h");
}
