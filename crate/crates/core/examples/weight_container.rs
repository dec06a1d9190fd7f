//! Writes a backbone to the MNWT container, reads it back and shows that a
//! flipped byte is caught.

use tumorscan::nn::{init_backbone_random, ModelConfig, WeightStore};

fn main() -> tumorscan::Result<()> {
    let model = ModelConfig::mobilenet_v1();
    let store = init_backbone_random(&model, 42);
    let params: usize = store.iter().map(|(_, t)| t.len()).sum();

    let bytes = store.to_bytes();
    println!("{} tensors, {params} parameters, {} bytes", store.len(), bytes.len());
    for (name, t) in store.iter().take(4) {
        println!("  {name:<32} {:?}", t.dims());
    }

    let back = WeightStore::from_bytes(&bytes)?;
    println!("round trip identical: {}", back.to_bytes() == bytes);

    let mut corrupt = bytes.clone();
    corrupt[bytes.len() / 2] ^= 0x40;
    match WeightStore::from_bytes(&corrupt) {
        Ok(_) => println!("corruption went unnoticed"),
        Err(e) => println!("corrupted copy rejected: {e}"),
    }
    Ok(())
}
