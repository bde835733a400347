use std::path::Path;

use relsql_cli::fuzz_checks::TARGETS;

#[test]
fn checked_in_seeds_replay_cleanly() {
    let fuzz = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz");
    for (name, check) in TARGETS {
        assert!(fuzz.join("fuzz_targets").join(format!("{name}.rs")).is_file(), "no target file for {name}");
        let mut seeds: Vec<_> = std::fs::read_dir(fuzz.join("corpus").join(name))
            .unwrap_or_else(|e| panic!("corpus for {name}: {e}"))
            .map(|e| e.unwrap().path())
            .collect();
        seeds.sort();
        assert!(!seeds.is_empty(), "{name} has no seeds");
        for seed in seeds {
            check(&std::fs::read(&seed).unwrap());
        }
    }
}

#[test]
fn every_target_file_is_registered() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/fuzz_targets");
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let stem = path.file_stem().unwrap().to_str().unwrap().to_string();
        assert!(TARGETS.iter().any(|(n, _)| *n == stem), "{stem} missing from TARGETS");
    }
}

#[test]
fn bodies_tolerate_garbage() {
    let inputs: [&[u8]; 6] = [b"", b"\xff\xfe", b"{", b"null", b"[1,2,3]", b"SELECT"];
    for (_, check) in TARGETS {
        for input in inputs {
            check(input);
        }
    }
}
