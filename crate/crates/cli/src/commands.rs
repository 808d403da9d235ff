use std::fmt::Write as _;
use std::path::Path;

use modart::compare::compare as compare_responses;
use modart::complexity::{complexity_report, log_space, ComplexityParams};
use modart::decompose::{decompose as run_decompose, DecomposeOptions};
use modart::eai::Restrict;
use modart::io::{self, RunManifest};
use modart::modal::Backend;
use modart::render::{render_pair, residue_components, synthesize_rir, RenderConfig};
use modart::scene::Scene;
use modart::system::{ArtSystem, BuildConfig, SceneSystem};
use modart::tdart::simulate_eir;
use modart::{Error, Result};

use crate::{
    BackendArg, BuildArgs, CompareArgs, ComplexityArgs, DecomposeArgs, RenderArgs, RestrictArg, SimulateArgs,
    SweepArg,
};

fn dir_string(p: &Path) -> String {
    p.display().to_string()
}

pub fn build(a: BuildArgs) -> Result<()> {
    let scene = Scene::load(&a.scene)?;
    let config = BuildConfig {
        fs_e: a.fs_e,
        seed: a.seed,
        patch_rays: a.rays,
        endpoint_rays: a.endpoint_rays,
        air_absorption: a.air_absorption,
        visibility_quorum: a.visibility_quorum,
    };
    let manifest = RunManifest {
        command: "build".into(),
        scene_path: Some(dir_string(&std::fs::canonicalize(&a.scene).unwrap_or(a.scene.clone()))),
        scene_hash: Some(scene.hash().to_string()),
        seed: a.seed,
        fs_e: a.fs_e,
        build: Some(config),
        output_dir: dir_string(&a.out),
        ..RunManifest::default()
    };
    let ss = SceneSystem::build(scene, config)?;
    let manifest = RunManifest {
        system_id: Some(ss.system.gains.system_id.clone()),
        ..manifest
    };
    io::create_dir(&a.out)?;
    io::write_system(&a.out, &ss.system, Some(&ss.paths), &manifest.stamp())?;
    let stored = io::finish_run(&a.out, &manifest)?;
    println!(
        "patches {} paths {} nnz {} states {} visibility {:.4}",
        ss.scene.n_patches(),
        ss.paths.len(),
        ss.system.feedback.nnz(),
        ss.system.delays.total(),
        ss.paths.visibility_ratio()
    );
    println!("manifest {}", stored.hash);
    Ok(())
}

/// The system of a build directory together with its manifest.
fn load_build(dir: &Path) -> Result<(ArtSystem, io::StoredManifest)> {
    let stored = io::read_manifest(dir)?;
    if stored.manifest.command != "build" {
        return Err(Error::Validation(format!("{} is not a build directory", dir.display())));
    }
    let id = stored
        .manifest
        .system_id
        .clone()
        .ok_or_else(|| Error::Validation("build manifest lacks a system id".into()))?;
    let system = io::read_system(dir, stored.manifest.fs_e, &id)?;
    Ok((system, stored))
}

pub fn decompose(a: DecomposeArgs) -> Result<()> {
    let backend = match a.backend {
        BackendArg::Eai => Backend::Eai,
        BackendArg::Arnoldi => Backend::Arnoldi,
    };
    let restrict = match a.restrict {
        RestrictArg::All => Restrict::All,
        RestrictArg::RealPositive => Restrict::RealPositive,
    };
    let mut opts = DecomposeOptions::new(backend, a.t_tr, restrict).fractional(a.fractional);
    opts.arnoldi.seed = a.seed;
    // Flag conflicts are reported before any file is read.
    opts.validate()?;
    let (system, build) = load_build(&a.system)?;
    if let Some(fs) = a.fs_e {
        if fs != system.fs_e {
            return Err(Error::Validation(format!(
                "--fs-e {fs} does not match the build rate {}",
                system.fs_e
            )));
        }
    }
    let manifest = RunManifest {
        command: "decompose".into(),
        scene_path: build.manifest.scene_path.clone(),
        scene_hash: build.manifest.scene_hash.clone(),
        seed: a.seed,
        fs_e: system.fs_e,
        t_tr_s: Some(a.t_tr),
        backend: Some(backend),
        restrict: Some(restrict),
        fractional: Some(a.fractional),
        system_id: Some(system.gains.system_id.clone()),
        inputs: vec![build.hash.clone()],
        output_dir: dir_string(&a.out),
        ..RunManifest::default()
    };
    let model = run_decompose(&system, &opts)?;
    io::create_dir(&a.out)?;
    io::write_model(&a.out, &model, &manifest.stamp())?;
    let stored = io::finish_run(&a.out, &manifest)?;
    println!("modes {}", model.len());
    for (m, mode) in model.modes.iter().enumerate() {
        let p = &mode.pole;
        println!(
            "{m} |p| {:.12} arg {:.9} t60_s {:.6} freq_hz {:.6}",
            p.magnitude, p.phase, p.t60_s, p.freq_hz
        );
    }
    println!("manifest {}", stored.hash);
    Ok(())
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let (system, build) = load_build(&a.system)?;
    let manifest = RunManifest {
        command: "simulate".into(),
        scene_path: build.manifest.scene_path.clone(),
        scene_hash: build.manifest.scene_hash.clone(),
        seed: build.manifest.seed,
        fs_e: system.fs_e,
        n_samples: Some(a.n),
        system_id: Some(system.gains.system_id.clone()),
        inputs: vec![build.hash.clone()],
        output_dir: dir_string(&a.out),
        ..RunManifest::default()
    };
    let eir = simulate_eir(&system, a.n)?;
    io::create_dir(&a.out)?;
    let stamp = manifest.stamp();
    for (l, row) in eir.data.iter().enumerate() {
        for (s, h) in row.iter().enumerate() {
            io::write_text(a.out.join(io::eir_file_name(l, s)), &io::eir_text(h, system.fs_e, &stamp))?;
        }
    }
    let stored = io::finish_run(&a.out, &manifest)?;
    println!("responses {} samples {}", system.n_listeners() * system.n_sources(), a.n);
    println!("manifest {}", stored.hash);
    Ok(())
}

fn pair_seed(seed: u64, pair: usize) -> u64 {
    seed.wrapping_add((pair as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

pub fn render(a: RenderArgs) -> Result<()> {
    let (system, build) = load_build(&a.system)?;
    let model = io::read_model(&a.model)?;
    let model_manifest = io::read_manifest(&a.model)?;
    let residues = residue_components(&model, &system.gains)?;
    let config = RenderConfig {
        n_samples: a.n,
        fs_e: model.fs_e,
        include_direct: !a.no_direct,
        noise_seed: a.seed,
        fs_audio: a.rir.unwrap_or(2.0 * model.fs_e),
    };
    config.validate()?;
    let manifest = RunManifest {
        command: "render".into(),
        scene_path: build.manifest.scene_path.clone(),
        scene_hash: build.manifest.scene_hash.clone(),
        seed: build.manifest.seed,
        noise_seed: a.rir.map(|_| a.seed),
        fs_e: model.fs_e,
        t_tr_s: Some(model.transition_time_s),
        n_samples: Some(a.n),
        system_id: Some(model.system_id.clone()),
        inputs: vec![build.hash.clone(), model_manifest.hash.clone()],
        output_dir: dir_string(&a.out),
        ..RunManifest::default()
    };
    io::create_dir(&a.out)?;
    let stamp = manifest.stamp();
    for l in 0..system.n_listeners() {
        for s in 0..system.n_sources() {
            let direct = system.gains.direct[l][s];
            let reverb = render_pair(&model, &residues, l, s, None, a.n)?;
            let mut h = reverb.clone();
            if config.include_direct {
                if let Some(d) = direct {
                    let t = d.delay.round().max(0.0) as usize;
                    if t < h.len() {
                        h[t] += d.gain;
                    }
                }
            }
            io::write_text(a.out.join(io::eir_file_name(l, s)), &io::eir_text(&h, model.fs_e, &stamp))?;
            io::write_text(a.out.join(format!("edc_l{l}_s{s}.txt")), &io::edc_text(&h, model.fs_e, &stamp))?;
            if let Some(fs_audio) = a.rir {
                let d = if config.include_direct { direct } else { None };
                let seed = pair_seed(a.seed, l * system.n_sources() + s);
                let rir = synthesize_rir(&reverb, d, model.fs_e, fs_audio, seed)?;
                io::write_wav(&a.out.join(format!("rir_l{l}_s{s}.wav")), &rir, fs_audio)?;
            }
        }
    }
    let stored = io::finish_run(&a.out, &manifest)?;
    println!("modes {} responses {}", model.len(), system.n_listeners() * system.n_sources());
    println!("manifest {}", stored.hash);
    Ok(())
}

pub fn compare(a: CompareArgs) -> Result<()> {
    let (reference, fs_r) = io::read_eir(&a.reference)?;
    let (candidate, fs_c) = io::read_eir(&a.candidate)?;
    if fs_r != fs_c {
        return Err(Error::Validation(format!("rates differ: {fs_r} vs {fs_c}")));
    }
    let r = compare_responses(&reference, &candidate, fs_r, a.t_tr)?;
    println!("mean_log_error_db {:.6}", r.mean_log_error_db);
    println!("window_s {:.6} {:.6}", r.start as f64 / fs_r, r.end as f64 / fs_r);
    println!("reference_t60_s {:.6}", r.reference_t60_s);
    println!("candidate_t60_s {:.6}", r.candidate_t60_s);
    if let Some(out) = a.out {
        io::write_json(out, &r)?;
    }
    Ok(())
}

pub fn complexity(a: ComplexityArgs) -> Result<()> {
    let checks = [
        ("n-p", a.n_p),
        ("nu", a.nu),
        ("n-t", a.n_t),
        ("n-k", a.n_k),
        ("n-rays", a.n_rays),
    ];
    if let Some((name, v)) = checks.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::Validation(format!("--{name} must be positive, got {v}")));
    }
    if a.n_refl.is_empty() || a.n_refl.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::Validation("--n-refl needs positive values".into()));
    }
    let base = ComplexityParams {
        n_patches: a.n_p,
        visibility: a.nu,
        n_paths: a.n_l,
        n_sources: a.n_s,
        n_listeners: a.n_r,
        moved_sources: a.dn_s.unwrap_or(a.n_s),
        moved_listeners: a.dn_r.unwrap_or(a.n_r),
        n_samples: a.n_t,
        n_modes: a.n_k,
        n_rays: a.n_rays,
        n_reflections: a.n_refl[0],
    };
    let points: Vec<(f64, ComplexityParams)> = match a.sweep {
        None => vec![(a.n_p, base)],
        Some(SweepArg::Endpoints) => (1..=100)
            .map(|n| {
                let n = n as f64;
                let p = ComplexityParams {
                    n_sources: n,
                    n_listeners: n,
                    moved_sources: n,
                    moved_listeners: n,
                    ..base
                };
                (n, p)
            })
            .collect(),
        Some(SweepArg::Patches) => log_space(10.0, 1e4, 40)
            .into_iter()
            .map(|n_p| {
                let p = ComplexityParams {
                    n_patches: n_p,
                    n_paths: None,
                    ..base
                };
                (n_p, p)
            })
            .collect(),
    };
    let label = match a.sweep {
        Some(SweepArg::Endpoints) => "n_endpoints",
        _ => "n_patches",
    };
    let mut s = format!("# {label}");
    for r in &a.n_refl {
        write!(s, " rtm_naive_{r} rtm_tree_{r}").unwrap();
    }
    s.push_str(" tdart tdart_static_sources modart\n");
    for (x, p) in points {
        write!(s, "{x}").unwrap();
        let mut last = None;
        for &r in &a.n_refl {
            let rep = complexity_report(&ComplexityParams { n_reflections: r, ..p });
            write!(s, " {:e} {:e}", rep.rtm_naive, rep.rtm_tree).unwrap();
            last = Some(rep);
        }
        let rep = last.expect("at least one order");
        writeln!(s, " {:e} {:e} {:e}", rep.tdart, rep.tdart_static_sources, rep.modart).unwrap();
    }
    match a.out {
        Some(out) => io::write_text(out, &s),
        None => {
            print!("{s}");
            Ok(())
        }
    }
}
