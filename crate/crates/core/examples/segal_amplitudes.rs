//! Amplitudes of discrete cylinders as operators on boundary data: gluing,
//! traces against the torus determinant, and the spectral gap.

use fieldlab::segal::{
    adjoint_check, build_amplitude, compose, free_trace_check, relative_deviation, spectral_suite, CylinderSlab,
    GluingMode, QuadratureOptions, SpectralProbe,
};

fn main() -> fieldlab::Result<()> {
    let opts = QuadratureOptions {
        boundary_order: 24,
        interior_order: 16,
    };
    let thin = CylinderSlab::free(2, 0, 1.0, 1.0);
    let u = build_amplitude(&thin, &opts)?;
    let direct = build_amplitude(&CylinderSlab::free(2, 1, 1.0, 1.0), &opts)?;
    println!("boundary grid size       {}", u.dim());
    println!(
        "glue(U, U) vs direct     {:.2e}",
        relative_deviation(&compose(&u, &u)?, &direct, GluingMode::Strict)?
    );
    println!("adjoint asymmetry        {:.2e}", adjoint_check(&u).asymmetry);

    for copies in [1, 2, 5] {
        let r = free_trace_check(&thin, &u, copies)?;
        println!(
            "tr(U^{copies})  log {:.10}  torus {:.10}  rel err {:.1e}",
            r.log_trace, r.log_partition, r.relative_error
        );
    }

    let probe = SpectralProbe {
        mix_f: u.grid_function(|x| (-x[0] * x[0]).exp()),
        mix_g: u.grid_function(|x| x[1] * (-x[1] * x[1]).exp()),
        k_max: 20,
        gibbs_f: u.grid_values(|x| x[0] * x[0]),
        gibbs_g: u.grid_values(|x| x[1] * x[1]),
        gibbs_separation: 2,
        n_list: vec![8, 10, 12],
    };
    let s = spectral_suite(&u, &probe)?;
    println!(
        "log lambda0 {:.8}  alpha {:.6}  mixing bound holds: {}",
        s.log_lambda0,
        s.alpha,
        s.mixing_holds()
    );
    Ok(())
}
