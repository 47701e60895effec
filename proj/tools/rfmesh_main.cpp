// Placeholder entry point; the full command set lands with the cli module.
int main() { return 0; }
