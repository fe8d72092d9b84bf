// Placeholder main; the full subcommand surface lands with the CLI module.
int main() { return 0; }
