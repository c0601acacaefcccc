fn main() {
    for path in std::env::args().skip(1) {
        let src = std::fs::read_to_string(&path).unwrap();
        match landau_core::compile(&src, &Default::default()) {
            Ok(c) => println!(
                "{path}: ok, {} actions, {} slots",
                c.trace.len(),
                c.lir.plan.total_slots()
            ),
            Err(d) => println!("{}", d.render(&path)),
        }
    }
}
