// Placeholder; the full acceptance suite lands after module bring-up.
#include <iostream>

int main() {
    std::cout << "acceptance suite not yet wired\n";
    return 1;
}
