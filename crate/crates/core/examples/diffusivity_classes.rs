use microrheo::kernels::{classify_diffusivity, kernel_eval, kernel_laplace, MemoryKernel};

fn main() -> microrheo::Result<()> {
    let kernels = [
        MemoryKernel::Dirac,
        MemoryKernel::prony(vec![1.0, 0.5], vec![2.0, 0.1])?,
        MemoryKernel::power_law(0.75)?,
    ];
    for k in &kernels {
        print!("{:<50}", serde_json::to_string(k)?);
        if !matches!(k, MemoryKernel::Dirac) {
            print!(
                " Γ(1) = {:.4}  Γ̃(0.01) = {:.4}",
                kernel_eval(k, 1.0)?,
                kernel_laplace(k, 0.01)?
            );
        }
        println!("\n    {:?}", classify_diffusivity(k));
    }
    Ok(())
}
