//! Wave stepping through the upscaled space: degenerate and refinement
//! checks that cross the lod and wave modules.

use fraclod::assembly::{assemble_forms, relative_energy_error};
use fraclod::field::{AnalyticScalar, BulkSource, GridField, InterfaceData, SourceTerm};
use fraclod::interp::{assemble_interpolation, classify, Variant};
use fraclod::linalg::DenseVector;
use fraclod::lod::{assemble_coarse_system, corrected_basis, reconstruct, LodContext};
use fraclod::mesh::{
    trace_fracture, unit_square_structured, FractureNetwork, MeshHierarchy, Point2,
};
use fraclod::wave::{wave_solve, TimeGrid, WaveOperators};

struct WaveSetup {
    hier: MeshHierarchy,
    fine_trace: fraclod::mesh::FractureTrace,
    coarse_trace: fraclod::mesh::FractureTrace,
    field: GridField,
    iface: InterfaceData,
    forms: fraclod::assembly::AssembledForms,
}

fn setup(n: usize, refinements: usize) -> WaveSetup {
    let hier = MeshHierarchy::from_coarse(unit_square_structured(n).unwrap(), refinements);
    let network =
        FractureNetwork::new(vec![vec![Point2::new(0.5, 0.0), Point2::new(0.5, 1.0)]]).unwrap();
    let coarse_trace = trace_fracture(hier.level(0), &network).unwrap();
    let fine_trace = trace_fracture(hier.finest(), &network).unwrap();
    let field = GridField::sample_uniform(4 * n, 0.1, 0.9, 5).unwrap();
    let iface = InterfaceData::new(vec![fraclod::field::PolylineData {
        conductivity: 2.0,
        density: 0.1,
        source: AnalyticScalar::BoxIndicator {
            lo: Point2::new(0.375, 0.375),
            hi: Point2::new(0.625, 0.625),
            inside: 1.0,
            outside: 0.0,
        },
    }])
    .unwrap();
    let source = SourceTerm::with_density(
        BulkSource::BoxIndicator {
            lo: Point2::new(0.375, 0.375),
            hi: Point2::new(0.625, 0.625),
            inside: 1.0,
            outside: 0.0,
        },
        1.0,
    );
    let forms = assemble_forms(
        hier.finest(),
        &field,
        Some((&fine_trace, &iface)),
        &source,
        true,
    )
    .unwrap();
    WaveSetup {
        hier,
        fine_trace,
        coarse_trace,
        field,
        iface,
        forms,
    }
}

fn fine_ops(s: &WaveSetup) -> WaveOperators {
    WaveOperators {
        mass: s.forms.mass.clone().unwrap(),
        stiffness: s.forms.stiffness.clone(),
        load: s.forms.load.clone(),
    }
}

fn upscaled_trajectory(
    s: &WaveSetup,
    k: usize,
    grid: TimeGrid,
    samples: &[f64],
) -> Vec<DenseVector> {
    let fine_level = s.hier.num_levels() - 1;
    let sets = classify(
        s.hier.level(0),
        &s.coarse_trace,
        500.0,
        Variant::FractureAware,
    )
    .unwrap();
    let interp = assemble_interpolation(
        &s.hier,
        0,
        fine_level,
        &sets,
        Some(&s.coarse_trace),
        Some(&s.fine_trace),
    )
    .unwrap();
    let ctx = LodContext::new(
        &s.hier,
        0,
        fine_level,
        &s.forms,
        &interp,
        &s.field,
        Some((&s.fine_trace, &s.iface)),
        Some(&s.coarse_trace),
    )
    .unwrap();
    let basis = corrected_basis(&ctx, k).unwrap();
    let system = assemble_coarse_system(&ctx, &basis, true).unwrap();
    let ops = WaveOperators {
        mass: system.mass.as_ref().unwrap().to_sparse(),
        stiffness: system.stiffness.to_sparse(),
        load: system.load.clone(),
    };
    wave_solve(&ops, grid, samples, None)
        .unwrap()
        .into_iter()
        .map(|state| reconstruct(&basis, &state.u))
        .collect()
}

#[test]
fn upscaled_trajectory_coincides_when_fine_equals_coarse() {
    let s = setup(8, 0);
    let grid = TimeGrid::new(0.01, 0.1).unwrap();
    let samples = [0.05, 0.1];
    let fine_states = wave_solve(&fine_ops(&s), grid, &samples, None).unwrap();
    let upscaled = upscaled_trajectory(&s, 1, grid, &samples);
    for (fine_state, up) in fine_states.iter().zip(&upscaled) {
        let err = relative_energy_error(&s.forms.stiffness, &fine_state.u, up).unwrap();
        assert!(err <= 1e-8, "h = H trajectories differ by {err}");
    }
}

#[test]
fn halving_tau_changes_error_less_than_spatial_error() {
    let s = setup(4, 2);
    let samples = [0.1];
    let mut errors = Vec::new();
    for tau in [0.01, 0.005] {
        let grid = TimeGrid::new(tau, 0.1).unwrap();
        let fine_states = wave_solve(&fine_ops(&s), grid, &samples, None).unwrap();
        let upscaled = upscaled_trajectory(&s, 2, grid, &samples);
        errors.push(
            relative_energy_error(&s.forms.stiffness, &fine_states[0].u, &upscaled[0]).unwrap(),
        );
    }
    let change = (errors[0] - errors[1]).abs();
    assert!(
        change < errors[1],
        "time-step sensitivity {change} not below the spatial error {}",
        errors[1]
    );
    assert!(errors[1] > 1e-4, "spatial error unexpectedly tiny");
}
