//! Write an embedding matrix with its clip-id sidecar, read it back, and
//! line it up with a manifest.

use emofad::io::{parse_manifest, sidecar_path};
use emofad::{load_embeddings, write_embeddings, EmbeddingSet};

fn main() -> emofad::Result<()> {
    let dir = std::env::temp_dir().join("emofad_embedding_files");
    std::fs::create_dir_all(&dir).map_err(|e| emofad::Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let path = dir.join("clap.npy");

    let rows = vec![vec![0.1, 0.2, 0.3], vec![0.4, 0.5, 0.6], vec![0.7, 0.8, 0.9]];
    let set = EmbeddingSet::from_rows("clap", &rows)?.with_clip_ids(vec!["b".into(), "a".into(), "c".into()])?;
    write_embeddings(&set, &path)?;
    println!("wrote {} and {}", path.display(), sidecar_path(&path).display());

    let back = load_embeddings(&path, "clap")?;
    println!("loaded {} x {}, ids {:?}", back.len(), back.dim(), back.clip_ids());

    let manifest = parse_manifest(b"clip_id,valence,arousal,label\na,0.5,0.5,\nc,-0.2,0.1,\n")?;
    let ids: Vec<&str> = manifest.clip_ids().collect();
    let picked = back.select_rows(&ids)?;
    println!("rows for {:?}: {}", ids, picked.vectors());
    Ok(())
}
