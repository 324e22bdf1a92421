#![allow(dead_code)]

use diamond_core::{Cube, CubeBuilder};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random cube of the given shape: each cell allocated with probability
/// `fill`, integer measure in `0..=max_measure`, cells inserted in a random
/// order. Value names are `"{dim}:{index}"`.
pub fn random_cube(shape: &[usize], fill: f64, max_measure: u32, seed: u64) -> Cube {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let volume: usize = shape.iter().product();
    let mut cells: Vec<Vec<usize>> = Vec::new();
    for flat in 0..volume {
        if rng.random_bool(fill) {
            let mut rest = flat;
            let mut coords = vec![0; shape.len()];
            for i in (0..shape.len()).rev() {
                coords[i] = rest % shape[i];
                rest /= shape[i];
            }
            cells.push(coords);
        }
    }
    cells.shuffle(&mut rng);
    let mut b = CubeBuilder::new((0..shape.len()).map(|i| format!("d{i}")));
    for coords in cells {
        let names: Vec<String> = coords.iter().enumerate().map(|(i, c)| format!("{i}:{c}")).collect();
        b.add(&names, rng.random_range(0..=max_measure) as f64).unwrap();
    }
    b.build()
}

/// The cube with its cells streamed in the given order.
pub fn reorder(cube: &Cube, order: &[usize]) -> Cube {
    let mut b = CubeBuilder::new(cube.dims().iter().map(|d| d.name().to_owned()));
    for &i in order {
        let cell = cube.cell(i);
        let names: Vec<&str> = cell
            .coords
            .iter()
            .enumerate()
            .map(|(d, &id)| cube.value_name(d, id).unwrap())
            .collect();
        b.add(&names, cell.measure).unwrap();
    }
    b.build()
}

/// Size bound for COUNT diamonds: at least `k_i` cells per retained value of
/// every dimension, and at least `(Π k_i)^(1/(d−1))` cells.
pub fn count_size_bound_holds(diamond: &Cube, k: &[f64]) -> bool {
    if diamond.is_empty() {
        return true;
    }
    let shape = diamond.shape();
    let cells = diamond.cell_count() as f64;
    let per_dim = k.iter().zip(&shape).all(|(&k, &n)| cells >= k * n as f64);
    let product_ok = if shape.len() > 1 {
        let p: f64 = k.iter().product();
        cells + 1e-9 >= p.powf(1.0 / (shape.len() as f64 - 1.0))
    } else {
        true
    };
    per_dim && product_ok
}
