use magictrap::{acceptance, Execution};

fn main() {
    let outcomes = acceptance::run_all(Execution::default());
    for o in &outcomes {
        println!("{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
