//! Blend quadrant and valence/arousal embeddings, then attend over music
//! tokens.

use emofad::conditioning::{
    clamp_to_quadrant, condition_music, emotion_embedding, ConditioningWeights, EmotionCondition, MusicEmbedding,
};
use emofad::{Quadrant, QuadrantConvention};
use nalgebra::{DMatrix, RowDVector};

fn main() -> emofad::Result<()> {
    let conv = QuadrantConvention::Russell;
    println!(
        "clamp (-0.3, 0.8) into Q1 -> {:?}",
        clamp_to_quadrant(-0.3, 0.8, Quadrant::Q1, conv)
    );

    let w = ConditioningWeights {
        h: 2,
        d_k: 2,
        d_v: 3,
        m_dim: 3,
        quadrant_table: DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0]),
        va_projection: DMatrix::identity(2, 2),
        va_bias: RowDVector::zeros(2),
        attn_q: DMatrix::identity(2, 2),
        attn_k: DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.5, 0.5]),
        attn_v: DMatrix::identity(3, 3),
    };
    for wgt_q in [0.0, 0.5, 1.0] {
        let cond = EmotionCondition::new(Quadrant::Q1, 0.5, 0.5, wgt_q, conv)?;
        println!(
            "wgt_q {wgt_q}: embedding {:?}",
            emotion_embedding(&cond, &w)?.as_slice()
        );
    }

    let music = MusicEmbedding::new(DMatrix::from_row_slice(
        4,
        3,
        &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0],
    ))?;
    let cond = EmotionCondition::new(Quadrant::Q1, 0.8, 0.8, 0.5, conv)?;
    let out = condition_music(&cond, &music, &w)?;
    println!("attention weights {:.4}", out.weights);
    println!("conditioned embedding {:.4}", out.output);
    Ok(())
}
