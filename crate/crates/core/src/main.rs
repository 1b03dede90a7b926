fn main() -> anyhow::Result<()> {
    poolnet::cli::main()
}
