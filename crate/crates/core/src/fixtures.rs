//! Small reference cubes used throughout the tests, the CLI examples and the
//! benches.

use crate::cube::{Cube, CubeBuilder};
use crate::ingest::{ingest_csv, ColumnRef, FactSchema};

pub const PRODUCTS: [&str; 6] = ["TV", "Camcorder", "Phone", "Camera", "Game console", "DVD Player"];
pub const STORES: [&str; 5] = ["Chicago", "Montreal", "Miami", "Paris", "Berlin"];

/// Sales in millions, `SALES[product][store]` in [`PRODUCTS`] × [`STORES`]
/// order.
pub const SALES: [[f64; 5]; 6] = [
    [3.4, 0.9, 0.1, 0.9, 2.0],
    [0.1, 1.4, 3.1, 2.3, 2.1],
    [0.2, 8.4, 2.1, 4.5, 0.1],
    [0.4, 2.7, 6.3, 4.6, 3.5],
    [3.2, 0.3, 0.3, 2.1, 1.5],
    [0.2, 0.5, 0.5, 2.2, 2.3],
];

/// The sales table as a fact CSV (`product,store,sales`), rows grouped by
/// store in alphabetical order and by product in table order within a store.
pub fn sales_csv() -> String {
    let mut stores: Vec<usize> = (0..STORES.len()).collect();
    stores.sort_by_key(|&s| STORES[s]);
    let mut out = String::from("product,store,sales\n");
    for s in stores {
        for (p, name) in PRODUCTS.iter().enumerate() {
            out.push_str(&format!("{name},{},{}\n", STORES[s], SALES[p][s]));
        }
    }
    out
}

/// The 6 × 5 sales cube, ingested from [`sales_csv`].
pub fn sales_cube() -> Cube {
    let schema = FactSchema::new(
        vec![ColumnRef::Name("product".into()), ColumnRef::Name("store".into())],
        Some(ColumnRef::Name("sales".into())),
    );
    ingest_csv(sales_csv().as_bytes(), &schema).expect("fixture parses")
}

/// The same facts streamed product by product, stores in table order.
pub fn sales_cube_row_major() -> Cube {
    let mut b = CubeBuilder::new(["product", "store"]);
    for (p, row) in SALES.iter().enumerate() {
        for (s, &m) in row.iter().enumerate() {
            b.add(&[PRODUCTS[p], STORES[s]], m).unwrap();
        }
    }
    b.build()
}

/// 10 × 10 COUNT cube: the top-left 5 × 5 quadrant holds 16 cells but is not
/// 3-carat, the bottom-right quadrant holds 15 cells and is the 3-carat
/// diamond.
pub const DENSITY_COUNTEREXAMPLE: [&str; 10] = [
    "1111100000",
    "1111100000",
    "1100000000",
    "1100000000",
    "1100000000",
    "0000011100",
    "0000001110",
    "0000000111",
    "0000010011",
    "0000011001",
];

/// Builds a two-dimensional COUNT cube (`row`, `col`) from a 0/1 bitmap,
/// streaming cells in row-major order. Attribute names are the indices.
pub fn bitmap_cube(rows: &[&str]) -> Cube {
    let mut b = CubeBuilder::new(["row", "col"]);
    for (r, line) in rows.iter().enumerate() {
        for (c, ch) in line.chars().enumerate() {
            if ch == '1' {
                b.add(&[r.to_string(), c.to_string()], 1.0).unwrap();
            }
        }
    }
    b.build()
}

pub fn density_counterexample() -> Cube {
    bitmap_cube(&DENSITY_COUNTEREXAMPLE)
}

/// Ids (0..5 or 5..10 as strings) of a quadrant of [`density_counterexample`].
pub fn quadrant(cube: &Cube, top_left: bool) -> Cube {
    let range = if top_left { 0..5 } else { 5..10 };
    let keep: Vec<Vec<u32>> = cube
        .dims()
        .iter()
        .map(|dim| range.clone().filter_map(|i| dim.id(&i.to_string())).collect())
        .collect();
    cube.restrict(&keep)
}

/// 4 × 4 checkerboard of +1 / −1: under SUM its even-index and odd-index
/// restrictions are both maximal 2-carat cubes.
pub fn checkerboard() -> Cube {
    let mut b = CubeBuilder::new(["row", "col"]);
    for r in 0..4 {
        for c in 0..4 {
            let m = if (r + c) % 2 == 0 { 1.0 } else { -1.0 };
            b.add(&[r.to_string(), c.to_string()], m).unwrap();
        }
    }
    b.build()
}

/// Restriction of [`checkerboard`] to the rows and columns of the given
/// parity.
pub fn checkerboard_parity(cube: &Cube, parity: usize) -> Cube {
    let keep: Vec<Vec<u32>> = cube
        .dims()
        .iter()
        .map(|dim| {
            (0..4)
                .filter(|i| i % 2 == parity)
                .filter_map(|i| dim.id(&i.to_string()))
                .collect()
        })
        .collect();
    cube.restrict(&keep)
}
