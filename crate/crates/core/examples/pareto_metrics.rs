//! Hypervolume, spacing and the error at a given used-time budget.

use stemo::evalmetrics::{error_at_used_time, hypervolume, nondominated, spacing, FrontPoint, ParetoFront};

fn main() -> stemo::Result<()> {
    let points: Vec<FrontPoint> = [(1.2, 0.0, 0.0), (0.6, 30.0, 0.3), (0.7, 40.0, 0.4), (0.3, 60.0, 0.6), (0.2, 90.0, 0.9)]
        .into_iter()
        .map(|(error, used_time_pct, acc)| FrontPoint {
            error,
            used_time_pct,
            omega: [acc, 1.0 - acc],
        })
        .collect();
    let objectives: Vec<[f64; 2]> = points.iter().map(FrontPoint::objectives).collect();
    println!("non-dominated: {:?}", nondominated(&objectives));
    let front = ParetoFront::with_worst_reference(points.clone());
    println!("hypervolume {:.3} against {:?}", hypervolume(&front)?, front.reference);
    println!("spacing {:.4}", spacing(&front.objectives())?);
    println!("MAE at 50% used time {:?}", error_at_used_time(&points, 50.0));
    Ok(())
}
