use cellprobe_core::chronogram::incidence_vector;
use cellprobe_core::field::{ff_rank, FieldMatrix, PrimeModulus};
use cellprobe_core::grid::{cross_out_extract, grid_family_for_epoch, hitting_number, sample_slab_queries};
use cellprobe_core::lattice::{scaled_lattice, LatticeSpec, Point};

#[test]
fn crossed_out_queries_have_independent_incidence_rows() {
    let (n, m, i) = (440u64, 55u64, 3u32);
    let modulus = PrimeModulus::for_points(n).unwrap();
    let points = scaled_lattice(&LatticeSpec::new(m, n).unwrap()).points;
    let family = grid_family_for_epoch(n, m, i).unwrap();
    let beta = (m as f64).powf(1.0 / i as f64);
    let mut nonempty = 0;
    for seed in 0..100 {
        let sample = sample_slab_queries(n, beta, i, seed).unwrap();
        for (_, grid) in &family.grids {
            let r = cross_out_extract(&sample.queries, grid);
            assert_eq!(r.hit, hitting_number(&sample.queries, grid));
            assert!(16 * r.survivors.len() >= r.hit - r.boundary_removed);
            if r.survivors.is_empty() {
                continue;
            }
            nonempty += 1;
            let rows = r
                .survivors
                .iter()
                .map(|&q| incidence_vector(&points, q, modulus).unwrap())
                .collect();
            let a = FieldMatrix::from_rows(modulus, m as usize, rows).unwrap();
            assert_eq!(ff_rank(&a), r.survivors.len(), "seed {seed}");
        }
    }
    assert!(nonempty > 100);
}

#[test]
fn dense_queries_survive_with_full_rank() {
    let (n, m) = (440u64, 233u64);
    let modulus = PrimeModulus::for_points(n).unwrap();
    let points = scaled_lattice(&LatticeSpec::new(m, n).unwrap()).points;
    let all: Vec<Point> = (0..n).step_by(3).flat_map(|x| (0..n).step_by(3).map(move |y| Point::new(x, y))).collect();
    for (_, grid) in &grid_family_for_epoch(n, m, 3).unwrap().grids {
        let r = cross_out_extract(&all, grid);
        let rows = r
            .survivors
            .iter()
            .map(|&q| incidence_vector(&points, q, modulus).unwrap())
            .collect();
        let a = FieldMatrix::from_rows(modulus, m as usize, rows).unwrap();
        assert_eq!(ff_rank(&a), r.survivors.len());
        assert!(!r.survivors.is_empty());
    }
}
