//! Dev probe: evaluates reference coupling sets and coarse scans per topology.

use ringlab::spectrum::FrequencyGrid;
use ringlab::topology::{evaluate_dbp, param_space, DrrParams, TopologyId};

fn show(label: &str, topo: TopologyId, couplings: &[f64], grid: &FrequencyGrid) {
    match DrrParams::new(topo, couplings.to_vec()) {
        Ok(p) => match evaluate_dbp(&p, grid) {
            Ok(m) => println!(
                "{label:28} {:14} t={couplings:?} -> dbp={:8.1} tau_band={:6.2} tau_pk={:6.2} bw={:6.2} GHz",
                topo.name(),
                m.dbp_ps_ghz,
                m.tau_band_ps,
                m.tau_peak_ps,
                m.bandwidth_ghz
            ),
            Err(e) => println!("{label:28} {:14} t={couplings:?} -> ERROR: {e}", topo.name()),
        },
        Err(e) => println!("{label:28} {:14} -> bad params: {e}", topo.name()),
    }
}

fn eval_vec(topo: TopologyId, x: &[f64], grid: &FrequencyGrid) -> f64 {
    let ps = param_space(topo, false);
    match ps.decode(x) {
        Ok(p) => evaluate_dbp(&p, grid).map(|m| m.dbp_ps_ghz).unwrap_or(f64::NEG_INFINITY),
        Err(_) => f64::NEG_INFINITY,
    }
}

/// Coordinate descent with shrinking steps from several coarse seeds.
fn refine_best(topo: TopologyId, coarse_step: f64, grid: &FrequencyGrid) {
    let ps = param_space(topo, false);
    let d = ps.dims();
    let n_per = (1.0 / coarse_step) as usize + 1;
    let total = n_per.pow(d as u32);
    let mut scored: Vec<(f64, Vec<f64>)> = Vec::new();
    for idx in 0..total {
        let mut rem = idx;
        let mut x = vec![0.0; d];
        for k in 0..d {
            x[k] = (rem % n_per) as f64 * coarse_step;
            rem /= n_per;
        }
        let v = eval_vec(topo, &x, grid);
        if v.is_finite() {
            scored.push((v, x));
        }
    }
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    scored.truncate(8);

    let mut best = (f64::NEG_INFINITY, vec![0.0; d]);
    for (v0, seed) in scored {
        let mut x = seed.clone();
        let mut v = v0;
        for &step in &[0.05, 0.02, 0.01, 0.005, 0.002, 0.001] {
            loop {
                let mut improved = false;
                for k in 0..d {
                    for s in [step, -step] {
                        let mut y = x.clone();
                        y[k] = (y[k] + s).clamp(0.0, 1.0);
                        let vy = eval_vec(topo, &y, grid);
                        if vy > v {
                            v = vy;
                            x = y;
                            improved = true;
                        }
                    }
                }
                if !improved {
                    break;
                }
            }
        }
        if v > best.0 {
            best = (v, x.clone());
        }
        println!("  seed {seed:?} ({v0:.1}) -> {v:.1} at {x:?}");
    }
    println!("refined {:14}: best dbp = {:.1} at {:?}", topo.name(), best.0, best.1);
    if let Ok(p) = ps.decode(&best.1) {
        if let Ok(m) = evaluate_dbp(&p, grid) {
            println!(
                "    tau_band={:.2} tau_pk={:.2} bw={:.2} band=[{:.1},{:.1}] GHz rel center",
                m.tau_band_ps,
                m.tau_peak_ps,
                m.bandwidth_ghz,
                (m.band_lo_rad_s - grid.center_omega()) / (2.0 * std::f64::consts::PI) * 1e-9,
                (m.band_hi_rad_s - grid.center_omega()) / (2.0 * std::f64::consts::PI) * 1e-9,
            );
        }
    }
}

fn coarse_best(topo: TopologyId, step: f64, grid: &FrequencyGrid) {
    let ps = param_space(topo, false);
    let d = ps.dims();
    let n_per = (1.0 / step) as usize + 1;
    let total = n_per.pow(d as u32);
    let mut best = f64::NEG_INFINITY;
    let mut best_x = vec![0.0; d];
    let mut errs = 0usize;
    for idx in 0..total {
        let mut rem = idx;
        let mut x = vec![0.0; d];
        for k in 0..d {
            x[k] = (rem % n_per) as f64 * step;
            rem /= n_per;
        }
        let p = match ps.decode(&x) {
            Ok(p) => p,
            Err(_) => continue,
        };
        match evaluate_dbp(&p, grid) {
            Ok(m) => {
                if m.dbp_ps_ghz > best {
                    best = m.dbp_ps_ghz;
                    best_x = x.clone();
                }
            }
            Err(_) => errs += 1,
        }
    }
    println!(
        "coarse scan {:14} step={step}: best dbp = {best:8.1} at {best_x:?}  ({errs}/{total} errored)",
        topo.name()
    );
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("rows");
    let grid = FrequencyGrid::scan_with_points(4096).unwrap();

    match mode {
        "rows" => {
            println!("== through-amplitude reading (t as printed) ==");
            show("row I", TopologyId::CascadedI, &[0.90, 0.01, 0.35], &grid);
            show("row II", TopologyId::ParallelII, &[0.88, 0.88, 0.00, 0.00], &grid);
            show("row III", TopologyId::EmbeddedIII, &[0.90, 1.00, 0.00, 0.65], &grid);
            show("row IV", TopologyId::ThreeByThreeIV, &[0.67, 0.00, 0.00], &grid);

            println!("== cross-amplitude reading (t -> sqrt(1-t^2)) ==");
            let x = |v: &[f64]| -> Vec<f64> {
                v.iter().map(|t| (1.0 - t * t).sqrt()).collect()
            };
            show("row I x", TopologyId::CascadedI, &x(&[0.90, 0.01, 0.35]), &grid);
            show("row II x", TopologyId::ParallelII, &x(&[0.88, 0.88, 0.00, 0.00]), &grid);
            show("row III x", TopologyId::EmbeddedIII, &x(&[0.90, 1.00, 0.00, 0.65]), &grid);
            show("row IV x", TopologyId::ThreeByThreeIV, &x(&[0.67, 0.00, 0.00]), &grid);
        }
        "single" => {
            // Fine scan of the single-ring reference.
            let mut best = (f64::NEG_INFINITY, 0.0);
            for i in 0..=100 {
                let t = i as f64 * 0.01;
                let p = DrrParams::new(TopologyId::SingleRing, vec![t]).unwrap();
                match evaluate_dbp(&p, &grid) {
                    Ok(m) => {
                        if i % 10 == 0 {
                            println!(
                                "t={t:4.2} dbp={:8.1} tau_band={:6.2} bw={:6.2}",
                                m.dbp_ps_ghz, m.tau_band_ps, m.bandwidth_ghz
                            );
                        }
                        if m.dbp_ps_ghz > best.0 {
                            best = (m.dbp_ps_ghz, t);
                        }
                    }
                    Err(e) => {
                        if i % 10 == 0 {
                            println!("t={t:4.2} ERROR {e}");
                        }
                    }
                }
            }
            println!("single-ring best: dbp={:.1} at t={:.2}", best.0, best.1);
        }
        "coarse" => {
            coarse_best(TopologyId::SingleRing, 0.01, &grid);
            coarse_best(TopologyId::CascadedI, 0.05, &grid);
            coarse_best(TopologyId::ThreeByThreeIV, 0.05, &grid);
            coarse_best(TopologyId::ParallelII, 0.1, &grid);
            coarse_best(TopologyId::EmbeddedIII, 0.1, &grid);
        }
        "refine" => {
            let topo = match args.get(2).map(String::as_str) {
                Some("cascaded") => TopologyId::CascadedI,
                Some("parallel") => TopologyId::ParallelII,
                Some("embedded") => TopologyId::EmbeddedIII,
                Some("three-by-three") => TopologyId::ThreeByThreeIV,
                Some("single-ring") => TopologyId::SingleRing,
                _ => TopologyId::CascadedI,
            };
            let step = if topo.coupling_count() > 3 { 0.1 } else { 0.05 };
            refine_best(topo, step, &grid);
        }
        "a3c" => {
            use ringlab::optim::{run_ra_a3c, RaA3cConfig};
            let topo = match args.get(2).map(String::as_str) {
                Some("parallel") => TopologyId::ParallelII,
                Some("embedded") => TopologyId::EmbeddedIII,
                Some("three-by-three") => TopologyId::ThreeByThreeIV,
                Some("single-ring") => TopologyId::SingleRing,
                _ => TopologyId::CascadedI,
            };
            let budget: usize =
                args.get(3).and_then(|s| s.parse().ok()).unwrap_or(20000);
            let seed: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0);
            let mut cfg = RaA3cConfig::new(budget, FrequencyGrid::scan_with_points(2048).unwrap());
            cfg.reward.workers = 1;
            let t0 = std::time::Instant::now();
            let run = run_ra_a3c(topo, &cfg, seed).unwrap();
            println!(
                "ra-a3c {} budget={budget} seed={seed}: best={:.1} at {:?} ({} improvements, {:.1}s)",
                topo.name(),
                run.best_dbp_ps_ghz,
                run.best_params.couplings,
                run.trace.rows.len(),
                t0.elapsed().as_secs_f64()
            );
        }
        "polish" => {
            // polish <topology> <x1,x2,...>
            let topo = TopologyId::from_name(args.get(2).map(String::as_str).unwrap_or("cascaded"))
                .unwrap_or(TopologyId::CascadedI);
            let mut x: Vec<f64> = args
                .get(3)
                .map(|s| s.split(',').filter_map(|v| v.parse().ok()).collect())
                .unwrap_or_default();
            let mut v = eval_vec(topo, &x, &grid);
            for &step in &[0.02, 0.01, 0.005, 0.002, 0.001, 0.0005, 0.0001] {
                loop {
                    let mut improved = false;
                    for k in 0..x.len() {
                        for s in [step, -step] {
                            let mut y = x.clone();
                            y[k] = (y[k] + s).clamp(0.0, 1.0);
                            let vy = eval_vec(topo, &y, &grid);
                            if vy > v {
                                v = vy;
                                x = y;
                                improved = true;
                            }
                        }
                    }
                    if !improved {
                        break;
                    }
                }
            }
            println!("polished {}: {v:.2} at {x:?}", topo.name());
            let ps = param_space(topo, false);
            let p = ps.decode(&x).unwrap();
            let fine = FrequencyGrid::default_scan();
            let m = evaluate_dbp(&p, &fine).unwrap();
            println!(
                "  on default grid: dbp={:.2} tau_band={:.3} tau_pk={:.3} bw={:.3}",
                m.dbp_ps_ghz, m.tau_band_ps, m.tau_peak_ps, m.bandwidth_ghz
            );
        }
        "eval" => {
            let topo = TopologyId::from_name(args.get(2).map(String::as_str).unwrap_or("cascaded"))
                .unwrap_or(TopologyId::CascadedI);
            let x: Vec<f64> = args
                .get(3)
                .map(|s| s.split(',').filter_map(|v| v.parse().ok()).collect())
                .unwrap_or_default();
            for pts in [1024usize, 2048, 4096, 8192, 16384] {
                let g = FrequencyGrid::scan_with_points(pts).unwrap();
                let p = param_space(topo, false).decode(&x).unwrap();
                match evaluate_dbp(&p, &g) {
                    Ok(m) => println!(
                        "{pts:6} pts: dbp={:9.2} tau={:6.3} bw={:7.3}",
                        m.dbp_ps_ghz, m.tau_band_ps, m.bandwidth_ghz
                    ),
                    Err(e) => println!("{pts:6} pts: ERROR {e}"),
                }
            }
        }
        "points" => {
            // Merged-loop candidates for parallel: rail bridges fully crossed.
            for t in [0.95, 0.9, 0.8, 0.5, 0.3, 0.2, 0.15] {
                for u in [0.95, 0.9, 0.8, 0.5, 0.3, 0.2, 0.15] {
                    show("par bridge", TopologyId::ParallelII, &[t, u, 0.0, 0.0], &grid);
                }
            }
        }
        other => eprintln!("unknown mode {other}"),
    }
}
