//! Lossless export and re-ingestion of runs and reports, with a provenance
//! manifest (config hash, build identifier, pinned tolerances).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decomposition::{EMState, PropagatorSeeds};
use crate::error::{Error, Result};
use crate::evolution::{StoredState, Trajectory};
use crate::field::{Rank, SpectralField};
use crate::layers::{Epsilon, FluidLayer};
use crate::lattice::Lattice;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub config_hash: String,
    pub build: String,
    pub tolerances: BTreeMap<String, f64>,
}

pub fn manifest_for(config_text: &str) -> Manifest {
    let mut hasher = Sha256::new();
    hasher.update(config_text.as_bytes());
    let hash = hasher.finalize();
    let mut tolerances = BTreeMap::new();
    tolerances.insert(
        "initial_data".into(),
        crate::decomposition::INITIAL_DATA_TOL,
    );
    tolerances.insert("blowup".into(), crate::evolution::BLOWUP_THRESHOLD);
    tolerances.insert(
        "emhd_constraint_drift".into(),
        crate::emhd::CONSTRAINT_DRIFT_TOL,
    );
    Manifest {
        config_hash: hex_string(&hash),
        build: build_id(),
        tolerances,
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn build_id() -> String {
    let version = env!("CARGO_PKG_VERSION");
    let describe = std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string());
    match describe {
        Some(d) if !d.is_empty() => format!("{version}+g{d}"),
        _ => version.to_string(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FieldDto {
    rank: String,
    /// component-major [re, im] pairs
    data: Vec<[f64; 2]>,
}

fn field_to_dto(f: &SpectralField) -> FieldDto {
    let rank = match f.rank() {
        Rank::Scalar => "scalar",
        Rank::Vector => "vector",
        Rank::Axial => "axial",
    };
    FieldDto {
        rank: rank.into(),
        data: f.data.iter().map(|c| [c.re, c.im]).collect(),
    }
}

fn field_from_dto(lat: &Arc<Lattice>, dto: &FieldDto) -> Result<SpectralField> {
    let rank = match dto.rank.as_str() {
        "scalar" => Rank::Scalar,
        "vector" => Rank::Vector,
        "axial" => Rank::Axial,
        other => return Err(Error::Serde(format!("unknown rank {other}"))),
    };
    let mut f = SpectralField::zeros(lat, rank);
    if dto.data.len() != f.data.len() {
        return Err(Error::SizeMismatch {
            want: f.data.len(),
            got: dto.data.len(),
        });
    }
    for (dst, src) in f.data.iter_mut().zip(&dto.data) {
        *dst = Complex64::new(src[0], src[1]);
    }
    f.real = f.hermitian_error() == 0.0;
    Ok(f)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerDto {
    weight: f64,
    rho: FieldDto,
    xi: FieldDto,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StateDto {
    t: f64,
    layers: Vec<LayerDto>,
    e_irr: FieldDto,
    e_sol: FieldDto,
    e_mean: [f64; 3],
    b: FieldDto,
    g_irr: FieldDto,
    g_sol: FieldDto,
    g_mean: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryDto {
    pub manifest: Option<Manifest>,
    dim: usize,
    cutoff: usize,
    grid: usize,
    epsilon: f64,
    dt: f64,
    times: Vec<f64>,
    states: Vec<StateDto>,
    source_times: Vec<f64>,
    g_hist: Vec<FieldDto>,
    h_hist: Vec<FieldDto>,
    q_hist: Vec<[f64; 3]>,
    seeds: Vec<FieldDto>,
    seed_means: [[f64; 3]; 2],
}

pub fn trajectory_to_dto(traj: &Trajectory, manifest: Option<Manifest>) -> TrajectoryDto {
    TrajectoryDto {
        manifest,
        dim: traj.lattice.dim(),
        cutoff: traj.lattice.cutoff() as usize,
        grid: traj.lattice.grid(),
        epsilon: traj.eps.get(),
        dt: traj.dt,
        times: traj.times.clone(),
        states: traj
            .states
            .iter()
            .map(|s| StateDto {
                t: s.t,
                layers: s
                    .layers
                    .iter()
                    .map(|l| LayerDto {
                        weight: l.weight,
                        rho: field_to_dto(&l.rho),
                        xi: field_to_dto(&l.xi),
                    })
                    .collect(),
                e_irr: field_to_dto(&s.em.e_irr),
                e_sol: field_to_dto(&s.em.e_sol),
                e_mean: s.em.e_mean,
                b: field_to_dto(&s.em.b),
                g_irr: field_to_dto(&s.g_irr),
                g_sol: field_to_dto(&s.g_sol),
                g_mean: s.g_mean,
            })
            .collect(),
        source_times: traj.source_times.clone(),
        g_hist: traj.g_hist.iter().map(field_to_dto).collect(),
        h_hist: traj.h_hist.iter().map(field_to_dto).collect(),
        q_hist: traj.q_hist.clone(),
        seeds: vec![
            field_to_dto(&traj.seeds.e_irr0),
            field_to_dto(&traj.seeds.dt_e_irr0),
            field_to_dto(&traj.seeds.e_sol0),
            field_to_dto(&traj.seeds.dt_e_sol0),
            field_to_dto(&traj.seeds.b0),
            field_to_dto(&traj.seeds.dt_b0),
        ],
        seed_means: [traj.seeds.e_mean0, traj.seeds.dt_e_mean0],
    }
}

pub fn trajectory_from_dto(dto: &TrajectoryDto) -> Result<Trajectory> {
    let lat = Lattice::new(dto.dim, dto.cutoff, dto.grid)?;
    let eps = Epsilon::new(dto.epsilon)?;
    let mut states = Vec::with_capacity(dto.states.len());
    for s in &dto.states {
        let layers: Vec<FluidLayer> = s
            .layers
            .iter()
            .map(|l| {
                Ok(FluidLayer {
                    weight: l.weight,
                    rho: field_from_dto(&lat, &l.rho)?,
                    xi: field_from_dto(&lat, &l.xi)?,
                })
            })
            .collect::<Result<_>>()?;
        states.push(StoredState {
            t: s.t,
            layers,
            em: EMState {
                e_irr: field_from_dto(&lat, &s.e_irr)?,
                e_sol: field_from_dto(&lat, &s.e_sol)?,
                e_mean: s.e_mean,
                b: field_from_dto(&lat, &s.b)?,
            },
            g_irr: field_from_dto(&lat, &s.g_irr)?,
            g_sol: field_from_dto(&lat, &s.g_sol)?,
            g_mean: s.g_mean,
        });
    }
    if dto.seeds.len() != 6 {
        return Err(Error::Serde("expected 6 seed fields".into()));
    }
    let seeds = PropagatorSeeds {
        e_irr0: field_from_dto(&lat, &dto.seeds[0])?,
        dt_e_irr0: field_from_dto(&lat, &dto.seeds[1])?,
        e_sol0: field_from_dto(&lat, &dto.seeds[2])?,
        dt_e_sol0: field_from_dto(&lat, &dto.seeds[3])?,
        b0: field_from_dto(&lat, &dto.seeds[4])?,
        dt_b0: field_from_dto(&lat, &dto.seeds[5])?,
        e_mean0: dto.seed_means[0],
        dt_e_mean0: dto.seed_means[1],
    };
    Ok(Trajectory {
        lattice: lat,
        eps,
        dt: dto.dt,
        times: dto.times.clone(),
        states,
        source_times: dto.source_times.clone(),
        g_hist: dto
            .g_hist
            .iter()
            .map(|f| field_from_dto(&Lattice::new(dto.dim, dto.cutoff, dto.grid)?, f))
            .collect::<Result<_>>()?,
        h_hist: dto
            .h_hist
            .iter()
            .map(|f| field_from_dto(&Lattice::new(dto.dim, dto.cutoff, dto.grid)?, f))
            .collect::<Result<_>>()?,
        q_hist: dto.q_hist.clone(),
        seeds,
        gauss_history: Vec::new(),
        div_b_max: 0.0,
        min_density: f64::NAN,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Serde(e.to_string()))?;
    file.write_all(text.as_bytes())?;
    file.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<T: for<'a> Deserialize<'a>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Serde(e.to_string()))
}

/// Write a rectangular table as CSV. Rust's shortest-round-trip float
/// formatting keeps the values lossless under re-parsing.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    writeln!(file, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(file, "{}", cells.join(","))?;
    }
    Ok(())
}
