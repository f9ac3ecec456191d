//! Parse LIBSVM text, collapse duplicate rows into frequencies, and split.

use asgbdt::dataset::{parse_libsvm, write_libsvm};

const TEXT: &str = "\
# label index:value ...
+1 1:0.5 3:2.0
-1 2:1.0
+1 1:0.5 3:2.0
+1 1:0.5 3:2.0
0 2:1.0 3:-1.5
1 1:0.5 3:2.0
-1 2:1.0
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let raw = parse_libsvm(TEXT)?;
    println!("raw rows: {}", raw.len());

    let ds = raw.deduplicate();
    println!("distinct samples: {}", ds.len());
    for i in 0..ds.len() {
        println!("  y={} m={} x={:?}", ds.labels()[i], ds.frequencies()[i], ds.sample(i).iter().collect::<Vec<_>>());
    }
    println!("{}", ds.stats());
    println!("fingerprint={}", ds.fingerprint());

    let (train, test) = ds.split_train_test(0.3, 7)?;
    println!("split: train n_raw={} test n_raw={}", train.n_raw(), test.n_raw());

    let mut out = Vec::new();
    write_libsvm(&ds, &mut out)?;
    print!("{}", String::from_utf8(out)?);
    Ok(())
}
