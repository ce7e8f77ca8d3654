fn main() {
    println!("ringlab");
}
