#![allow(dead_code)]

use linengine::config::RunConfig;
use linengine::model::EngineConfig;

pub fn driven_pair(eps: f64) -> EngineConfig {
    let src = format!(
        r#"
[network]
v0 = [[2.0, 0.0], [0.0, 17.0]]
drive_freq = 3.0
fourier = [
  {{ m = 1, matrix = [[0.0, {eps}], [{eps}, 0.0]] }},
  {{ m = -1, matrix = [[0.0, {eps}], [{eps}, 0.0]] }},
]
[numerics]
n_max = 6
quad_tol = 1e-7
panels = 4
[[reservoirs]]
label = "cold"
projector = [1.0, 0.0]
profile = {{ gamma = 0.1, cutoff = 10.0 }}
occupation = {{ kind = "thermal", T = 0.3 }}
[[reservoirs]]
label = "hot"
projector = [0.0, 1.0]
profile = {{ gamma = 0.1, cutoff = 10.0 }}
occupation = {{ kind = "thermal", T = 2.0 }}
"#
    );
    RunConfig::from_toml_str(&src).unwrap().engine().unwrap()
}

pub fn single(v1: f64, temperature: f64) -> EngineConfig {
    let src = format!(
        r#"
[network]
v0 = [[1.2]]
drive_freq = 2.5
fourier = [ {{ m = 1, matrix = [[{v1}]] }}, {{ m = -1, matrix = [[{v1}]] }} ]
[numerics]
quad_tol = 1e-7
panels = 4
[[reservoirs]]
label = "bath"
projector = [1.0]
profile = {{ gamma = 0.1, cutoff = 2.0 }}
occupation = {{ kind = "thermal", T = {temperature} }}
"#
    );
    RunConfig::from_toml_str(&src).unwrap().engine().unwrap()
}

pub fn bundled(name: &str) -> EngineConfig {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    RunConfig::from_path(&path).unwrap().engine().unwrap()
}

/// One oscillator between a hot and a cold bath.
pub fn two_bath(v1: f64) -> EngineConfig {
    let src = format!(
        r#"
[network]
v0 = [[1.2]]
drive_freq = 2.5
fourier = [ {{ m = 1, matrix = [[{v1}]] }}, {{ m = -1, matrix = [[{v1}]] }} ]
[[reservoirs]]
label = "hot"
projector = [1.0]
profile = {{ gamma = 0.1, cutoff = 1.0 }}
occupation = {{ kind = "thermal", T = 2.0 }}
[[reservoirs]]
label = "cold"
projector = [1.0]
profile = {{ gamma = 0.1, cutoff = 1.0 }}
occupation = {{ kind = "thermal", T = 0.5 }}
"#
    );
    RunConfig::from_toml_str(&src).unwrap().engine().unwrap()
}
