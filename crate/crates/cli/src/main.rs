fn main() {
    // Placeholder entry point; subcommands land with the command modules.
    eprintln!("isacbeam: no command modules built yet");
    std::process::exit(4);
}
