//! The bundled SMT-LIB solver, shipped next to `hoconc` so the tester
//! works out of the box when no system solver is installed. Reads a script
//! on stdin, replies on stdout.

use std::io::Read;

fn main() {
    let mut script = String::new();
    if std::io::stdin().read_to_string(&mut script).is_err() {
        eprintln!("(error \"could not read stdin\")");
        std::process::exit(2);
    }
    match hoconc_minismt::run_script(&script) {
        Ok(reply) => print!("{reply}"),
        Err(e) => {
            println!("(error \"{e}\")");
            std::process::exit(1);
        }
    }
}
