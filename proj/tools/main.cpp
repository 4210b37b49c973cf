#include <iostream>

int main() {
    std::cout << "logitmix: subcommands not wired up yet\n";
    return 0;
}
