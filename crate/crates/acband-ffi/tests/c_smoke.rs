//! Compiles and runs a real C client against the generated header and
//! the static library, when a C toolchain is available.

use std::path::PathBuf;
use std::process::Command;

const CLIENT: &str = r#"
#include <assert.h>
#include <stdio.h>
#include <string.h>
#include "acband.h"

int main(void) {
    AcbandMatrix *matrix = NULL;
    assert(acband_matrix_generate(60, 400, 0.2, 0.25, 50.0, 5, &matrix) == ACBAND_STATUS_OK);

    size_t rows = 0, cols = 0;
    assert(acband_matrix_dims(matrix, &rows, &cols) == ACBAND_STATUS_OK);
    assert(rows == 60 && cols == 400);

    AcbandRunConfig config;
    assert(acband_run_config_default(&config) == ACBAND_STATUS_OK);
    config.alpha = 0.2;
    config.delta = 0.1;
    config.epsilon = 0.25;
    config.budget = 300;

    AcbandResult *result = NULL;
    assert(acband_run(matrix, &config, &result) == ACBAND_STATUS_OK);

    size_t winner = 0;
    double cpu = 0.0;
    assert(acband_result_winner(result, &winner) == ACBAND_STATUS_OK);
    assert(acband_result_cpu_seconds(result, &cpu) == ACBAND_STATUS_OK);
    assert(winner < 60 && cpu > 0.0);

    char *json = NULL;
    assert(acband_result_to_json(result, &json) == ACBAND_STATUS_OK);
    assert(strstr(json, "\"winner\"") != NULL);
    acband_string_free(json);

    config.budget = 10;
    AcbandResult *starved = NULL;
    assert(acband_run(matrix, &config, &starved) == ACBAND_STATUS_INSUFFICIENT_BUDGET);
    assert(strlen(acband_last_error()) > 0);

    acband_result_free(result);
    acband_matrix_free(matrix);
    return 0;
}
"#;

/// The static library lands next to the other build artifacts.
fn static_lib() -> PathBuf {
    let target = std::env::var("CARGO_TARGET_DIR").map(PathBuf::from).unwrap_or_else(|_| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../target")
    });
    let profile = if cfg!(debug_assertions) { "debug" } else { "release" };
    target.join(profile).join("libacband_ffi.a")
}

#[test]
fn c_client_links_and_runs() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".to_string());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler in this environment");
        return;
    }
    let lib = static_lib();
    if !lib.exists() {
        eprintln!("skipping: {} has not been built", lib.display());
        return;
    }

    let dir = tempfile::tempdir().unwrap();
    let source = dir.path().join("smoke.c");
    std::fs::write(&source, CLIENT).unwrap();
    let binary = dir.path().join("smoke");
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");

    let compile = Command::new(&cc)
        .arg(&source)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&binary)
        .output()
        .unwrap();
    assert!(
        compile.status.success(),
        "compilation failed: {}",
        String::from_utf8_lossy(&compile.stderr)
    );

    let run = Command::new(&binary).output().unwrap();
    assert!(
        run.status.success(),
        "client failed: {}",
        String::from_utf8_lossy(&run.stderr)
    );
}
