use std::path::PathBuf;
use std::process::Command;

const SOURCE: &str = r#"
#include <stdio.h>
#include <math.h>
#include "orbitlearn.h"

int main(void) {
    OlField *field = NULL;
    if (ol_field_bennu_normalized(&field) != OL_STATUS_OK) return 10;

    double pos[3] = {1.5, 0.0, 0.0};
    double u = 0.0;
    if (ol_field_potential(field, pos, &u) != OL_STATUS_OK) return 11;

    OlElements el = {2.0, 0.1, 0.5, 0.0, 0.0, 0.0};
    OlState s;
    if (ol_elements_to_state(&el, 1.0, &s) != OL_STATUS_OK) return 12;

    OlTrajectory *traj = NULL;
    if (ol_propagate(field, &s, 1.0, 25, 200, &traj) != OL_STATUS_OK) return 13;
    size_t n = ol_trajectory_len(traj);
    ol_trajectory_free(traj);

    double origin[3] = {0.0, 0.0, 0.0};
    double acc[3];
    OlStatus bad = ol_field_acceleration(field, origin, acc);
    const char *msg = ol_last_error_message();

    ol_field_free(field);
    printf("%.15f %zu %d %s\n", u, n, (int)bad, msg[0] ? "message" : "empty");
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // target/<profile>/deps/<this test>
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler, skipping");
        return;
    }
    let lib = target_dir().join("liborbitlearn_ffi.a");
    assert!(lib.is_file(), "missing {}", lib.display());

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, SOURCE).unwrap();
    let exe = dir.path().join("main");
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success());

    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    let text = String::from_utf8(out.stdout).unwrap();
    let parts: Vec<&str> = text.split_whitespace().collect();
    let core = orbitlearn::gravity::ZonalGravityField::bennu_normalized()
        .potential(&orbitlearn::Vec3::new(1.5, 0.0, 0.0))
        .unwrap();
    assert!((parts[0].parse::<f64>().unwrap() - core).abs() < 1e-14);
    assert_eq!(parts[1], "25");
    assert_eq!(parts[2], "3");
    assert_eq!(parts[3], "message");
}
