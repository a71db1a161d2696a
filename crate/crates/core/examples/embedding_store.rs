//! Write an embedding store in the binary interchange format, read it back,
//! and query it by id.

use artjudge::store::{cosine, read_store, write_store, EmbeddingMatrix};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let matrix = EmbeddingMatrix::from_rows(
        3,
        [
            ("nocturne", vec![1.0f32, 0.0, 0.0]),
            ("harbour", vec![0.6, 0.8, 0.0]),
            ("orchard", vec![0.0, 0.6, 0.8]),
        ],
    )?;
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("visual.ajem");
    write_store(&matrix, &path)?;
    println!("wrote {} ({} bytes)", path.display(), std::fs::metadata(&path)?.len());

    let back = read_store(&path)?;
    assert_eq!(back, matrix);
    println!("{} rows of dimension {}, normalized: {}", back.count(), back.dim(), back.is_normalized());
    for id in back.ids() {
        let c = cosine(back.require("nocturne")?, back.require(id)?)?;
        println!("cos(nocturne, {id}) = {c:.3}");
    }
    Ok(())
}
