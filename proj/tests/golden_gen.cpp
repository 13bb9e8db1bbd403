// Writes the golden codec corpus into the directory given as argv[1].

#include <fstream>
#include <iostream>

#include "support.hpp"

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: golden_gen <dir>\n";
        return 2;
    }
    for (const auto& c : cpsim::test::golden_cases()) {
        const cpsim::Bytes b = cpsim::canonical_bytes(c.message);
        std::ofstream out(std::string(argv[1]) + "/" + c.file, std::ios::binary);
        out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
        std::cout << c.file << ' ' << b.size() << " bytes\n";
    }
    return 0;
}
