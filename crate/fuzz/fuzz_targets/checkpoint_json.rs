#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| relsql_cli::fuzz_checks::checkpoint_json(data));
